#include "brief/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/tokenizer.hpp>

#include "brief/descriptor.hpp"
#include "brief/rdcurve.hpp"

namespace brief {
namespace {

namespace pt = boost::property_tree;

[[noreturn]] void fail(const std::string& message) { throw ConfigError(message); }

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const std::string t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) fail(key + ": expected a number, got '" + text + "'");
  return value;
}

template <class T>
std::vector<T> parse_numbers(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<T>(key, item));
  return out;
}

std::vector<Ratio> parse_ratios(const std::string& key, const std::string& text) {
  std::vector<Ratio> out;
  try {
    for (const auto& item : split_list(text)) out.push_back(Ratio::parse(item));
  } catch (const std::invalid_argument& e) {
    fail(key + ": " + e.what());
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  fail(key + ": expected a boolean, got '" + text + "'");
}

std::vector<std::string> split_command(const std::string& text) {
  std::vector<std::string> argv;
  boost::escaped_list_separator<char> sep('\\', ' ', '"');
  boost::tokenizer<boost::escaped_list_separator<char>> tokens(text, sep);
  try {
    for (const auto& t : tokens) {
      if (!t.empty()) argv.push_back(t);
    }
  } catch (const boost::escaped_list_error& e) {
    fail(std::string("oracle.trainer_command: ") + e.what());
  }
  return argv;
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::ostringstream out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out << ',';
    if constexpr (std::is_same_v<T, double>) {
      out << format_double(items[i]);
    } else if constexpr (std::is_same_v<T, Ratio>) {
      out << items[i].str();
    } else {
      out << items[i];
    }
  }
  return out.str();
}

std::string quote_command(const std::vector<std::string>& argv) {
  std::string out;
  for (const auto& a : argv) {
    if (!out.empty()) out.push_back(' ');
    if (a.find_first_of(" \"\\") == std::string::npos) {
      out += a;
      continue;
    }
    out.push_back('"');
    for (char c : a) {
      if (c == '"' || c == '\\') out.push_back('\\');
      out.push_back(c);
    }
    out.push_back('"');
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(trim(value));
  if (p.empty() || p.is_absolute()) return p;
  return std::filesystem::absolute(base / p).lexically_normal();
}

std::vector<int> cifar_milestones(int epochs) { return {epochs / 2, epochs * 3 / 4}; }

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"command"}},
      {"model",
       {"family", "depth", "block_widths", "input_channels", "num_classes", "dataset", "descriptor",
        "reduced_trailing_widths"}},
      {"oracle",
       {"kind", "a_max", "exponent", "weights", "frontiers", "trainer_command", "parallelism", "timeout_seconds",
        "ledger"}},
      {"search", {"delta", "scope", "beta_return_mode", "direction", "seed"}},
      {"budget",
       {"recipe", "use", "search_epochs", "search_lr_initial", "search_milestones", "search_batch_size",
        "final_epochs", "final_lr_initial", "final_milestones", "final_batch_size", "lr_divisor", "momentum",
        "weight_decay", "optimizer"}},
      {"lesion", {"kind", "values", "indices"}},
      {"rd", {"alphas", "with_brief"}},
      {"output", {"run_dir"}},
  };
  return keys;
}

}  // namespace

std::vector<std::size_t> parse_index_list(const std::string& text, std::size_t first, std::size_t limit) {
  std::vector<std::size_t> out;
  if (trim(text) == "all") {
    for (std::size_t i = first; i < limit; ++i) out.push_back(i);
    return out;
  }
  for (const auto& item : split_list(text)) {
    if (auto dash = item.find('-'); dash != std::string::npos && dash > 0) {
      auto lo = parse_number<std::size_t>("indices", item.substr(0, dash));
      auto hi = parse_number<std::size_t>("indices", item.substr(dash + 1));
      if (hi < lo) fail("indices: empty range '" + item + "'");
      for (std::size_t i = lo; i <= hi; ++i) out.push_back(i);
    } else {
      out.push_back(parse_number<std::size_t>("indices", item));
    }
  }
  for (auto i : out) {
    if (i < first || i >= limit)
      fail("indices: " + std::to_string(i) + " outside [" + std::to_string(first) + ", " + std::to_string(limit) + ")");
  }
  return out;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read config file " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  auto base = std::filesystem::absolute(path).parent_path();
  return parse(text.str(), base);
}

RunConfig RunConfig::parse(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(std::string("config syntax: ") + e.what());
  }

  RunConfig c;
  const auto& keys = known_keys();
  for (const auto& [section, body] : tree) {
    auto it = keys.find(section);
    if (it == keys.end()) {
      c.warnings.push_back("unknown section [" + section + "]");
      continue;
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) c.warnings.push_back("unknown key " + section + "." + key);
    }
  }

  auto get = [&](const std::string& key) -> std::optional<std::string> {
    auto v = tree.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!v) return std::nullopt;
    return trim(*v);
  };

  if (auto v = get("run.command")) c.command = *v;

  if (auto v = get("model.family")) c.model.family = *v;
  if (auto v = get("model.depth")) c.model.depth = parse_number<int>("model.depth", *v);
  if (auto v = get("model.block_widths")) c.model.block_widths = parse_numbers<int>("model.block_widths", *v);
  if (auto v = get("model.input_channels")) c.model.input_channels = parse_number<int>("model.input_channels", *v);
  if (auto v = get("model.num_classes")) c.model.num_classes = parse_number<int>("model.num_classes", *v);
  if (auto v = get("model.dataset")) c.model.dataset = *v;
  if (auto v = get("model.descriptor")) c.model.descriptor = resolve(base_dir, *v);
  if (auto v = get("model.reduced_trailing_widths"))
    c.model.reduced_trailing_widths = parse_numbers<int>("model.reduced_trailing_widths", *v);

  if (auto v = get("oracle.kind")) c.oracle.kind = *v;
  if (auto v = get("oracle.a_max")) c.oracle.a_max = parse_number<double>("oracle.a_max", *v);
  if (auto v = get("oracle.exponent")) c.oracle.exponent = parse_number<double>("oracle.exponent", *v);
  if (auto v = get("oracle.weights")) c.oracle.weights = parse_numbers<double>("oracle.weights", *v);
  if (auto v = get("oracle.frontiers")) c.oracle.frontiers = parse_numbers<double>("oracle.frontiers", *v);
  if (auto v = get("oracle.trainer_command")) c.oracle.trainer_command = split_command(*v);
  if (auto v = get("oracle.parallelism")) c.oracle.parallelism = parse_number<std::size_t>("oracle.parallelism", *v);
  if (auto v = get("oracle.timeout_seconds"))
    c.oracle.timeout_seconds = parse_number<double>("oracle.timeout_seconds", *v);
  if (auto v = get("oracle.ledger")) c.oracle.ledger = resolve(base_dir, *v);

  if (auto v = get("search.delta")) c.search.delta = parse_number<double>("search.delta", *v);
  if (auto v = get("search.scope")) {
    if (*v != "all") c.search.scope = parse_number<std::size_t>("search.scope", *v);
  }
  try {
    if (auto v = get("search.beta_return_mode")) c.search.beta_return = parse_beta_return_mode(*v);
    if (auto v = get("search.direction")) c.search.direction = parse_direction(*v);
    if (auto v = get("lesion.kind")) c.lesion.kind = parse_lesion_kind(*v);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (auto v = get("search.seed")) c.search.seed = parse_number<std::uint64_t>("search.seed", *v);

  if (auto v = get("budget.recipe")) c.budget.recipe = *v;
  if (c.budget.recipe == "cifar") {
    c.budget.search.batch_size = c.budget.final.batch_size = 128;
  } else if (c.budget.recipe != "imagenet") {
    fail("budget.recipe must be imagenet or cifar, got '" + c.budget.recipe + "'");
  }
  if (auto v = get("budget.use")) c.budget.use = *v;
  for (auto* which : {&c.budget.search, &c.budget.final}) {
    const std::string prefix = which == &c.budget.search ? "budget.search_" : "budget.final_";
    if (auto v = get(prefix + "epochs")) which->epochs = parse_number<int>(prefix + "epochs", *v);
    if (c.budget.recipe == "cifar") which->lr_milestones = cifar_milestones(which->epochs);
    if (auto v = get(prefix + "milestones")) which->lr_milestones = parse_numbers<int>(prefix + "milestones", *v);
    if (auto v = get(prefix + "lr_initial")) which->lr_initial = parse_number<double>(prefix + "lr_initial", *v);
    if (auto v = get(prefix + "batch_size")) which->batch_size = parse_number<int>(prefix + "batch_size", *v);
    if (auto v = get("budget.lr_divisor")) which->lr_divisor = parse_number<double>("budget.lr_divisor", *v);
    if (auto v = get("budget.momentum")) which->momentum = parse_number<double>("budget.momentum", *v);
    if (auto v = get("budget.weight_decay")) which->weight_decay = parse_number<double>("budget.weight_decay", *v);
    if (auto v = get("budget.optimizer")) which->optimizer = *v;
    which->seed = c.search.seed;
  }

  if (auto v = get("lesion.values")) c.lesion.values = parse_ratios("lesion.values", *v);
  if (auto v = get("lesion.indices")) c.lesion.indices = *v;

  if (auto v = get("rd.alphas")) c.rd.alphas = parse_ratios("rd.alphas", *v);
  if (auto v = get("rd.with_brief")) c.rd.with_brief = parse_bool("rd.with_brief", *v);

  if (auto v = get("output.run_dir")) c.run_dir = resolve(base_dir, *v);

  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (model.family != "sequential" && model.family != "descriptor")
    fail("model.family must be sequential or descriptor, got '" + model.family + "'");
  if (model.family == "descriptor") {
    if (model.descriptor.empty()) fail("model.descriptor is required for family = descriptor");
    if (!std::filesystem::exists(model.descriptor)) fail("model descriptor not found: " + model.descriptor.string());
  }
  if (oracle.kind != "surrogate" && oracle.kind != "replay" && oracle.kind != "external")
    fail("oracle.kind must be surrogate, replay or external, got '" + oracle.kind + "'");
  if (oracle.kind == "external" && oracle.trainer_command.empty())
    fail("oracle.trainer_command is required for the external oracle");
  if (oracle.kind == "replay" && !oracle.ledger.empty() && !std::filesystem::exists(oracle.ledger))
    fail("ledger not found: " + oracle.ledger.string());
  if (oracle.parallelism < 1) fail("oracle.parallelism must be >= 1");
  if (!(search.delta > 0.0 && search.delta < 1.0)) fail("search.delta must lie in (0, 1)");
  if (search.scope && *search.scope < 1) fail("search.scope must be >= 1");
  if (budget.use != "search" && budget.use != "final") fail("budget.use must be search or final");
  try {
    budget.search.validate();
    budget.final.validate();
  } catch (const std::invalid_argument& e) {
    fail(std::string("budget: ") + e.what());
  }
  if (rd.alphas.empty()) fail("rd.alphas must not be empty");
  if (lesion.values.empty()) fail("lesion.values must not be empty");
}

std::string RunConfig::to_ini() const {
  pt::ptree t;
  if (!command.empty()) t.put("run.command", command);

  t.put("model.family", model.family);
  t.put("model.depth", model.depth);
  t.put("model.block_widths", join(model.block_widths));
  t.put("model.input_channels", model.input_channels);
  t.put("model.num_classes", model.num_classes);
  if (!model.dataset.empty()) t.put("model.dataset", model.dataset);
  if (!model.descriptor.empty()) t.put("model.descriptor", model.descriptor.string());
  if (!model.reduced_trailing_widths.empty()) t.put("model.reduced_trailing_widths", join(model.reduced_trailing_widths));

  t.put("oracle.kind", oracle.kind);
  if (oracle.a_max) t.put("oracle.a_max", format_double(*oracle.a_max));
  if (oracle.exponent) t.put("oracle.exponent", format_double(*oracle.exponent));
  if (!oracle.weights.empty()) t.put("oracle.weights", join(oracle.weights));
  if (!oracle.frontiers.empty()) t.put("oracle.frontiers", join(oracle.frontiers));
  if (!oracle.trainer_command.empty()) t.put("oracle.trainer_command", quote_command(oracle.trainer_command));
  t.put("oracle.parallelism", oracle.parallelism);
  t.put("oracle.timeout_seconds", format_double(oracle.timeout_seconds));
  if (!oracle.ledger.empty()) t.put("oracle.ledger", oracle.ledger.string());

  t.put("search.delta", format_double(search.delta));
  t.put("search.scope", search.scope ? std::to_string(*search.scope) : std::string("all"));
  t.put("search.beta_return_mode", std::string(to_string(search.beta_return)));
  t.put("search.direction", std::string(to_string(search.direction)));
  t.put("search.seed", search.seed);

  t.put("budget.recipe", budget.recipe);
  t.put("budget.use", budget.use);
  for (const auto* which : {&budget.search, &budget.final}) {
    const std::string prefix = which == &budget.search ? "budget.search_" : "budget.final_";
    t.put(prefix + "epochs", which->epochs);
    t.put(prefix + "lr_initial", format_double(which->lr_initial));
    t.put(prefix + "milestones", join(which->lr_milestones));
    t.put(prefix + "batch_size", which->batch_size);
  }
  t.put("budget.lr_divisor", format_double(budget.search.lr_divisor));
  t.put("budget.momentum", format_double(budget.search.momentum));
  t.put("budget.weight_decay", format_double(budget.search.weight_decay));
  t.put("budget.optimizer", budget.search.optimizer);

  t.put("lesion.kind", std::string(to_string(lesion.kind)));
  t.put("lesion.values", join(lesion.values));
  t.put("lesion.indices", lesion.indices);

  t.put("rd.alphas", join(rd.alphas));
  t.put("rd.with_brief", rd.with_brief ? "true" : "false");

  if (!run_dir.empty()) t.put("output.run_dir", run_dir.string());

  std::ostringstream out;
  pt::write_ini(out, t);
  return out.str();
}

ModelSpec RunConfig::build_model() const {
  ModelSpec spec;
  try {
    if (model.family == "descriptor") {
      spec = load_model_descriptor(model.descriptor);
    } else {
      spec = build_sequential_cnn(model.depth, model.block_widths, model.input_channels, model.num_classes);
    }
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  } catch (const std::runtime_error& e) {
    fail(e.what());
  }
  if (!model.dataset.empty()) spec.metadata.dataset = model.dataset;
  return spec;
}

SurrogateParams RunConfig::surrogate_params(std::size_t num_blocks) const {
  SurrogateParams p = SurrogateParams::defaults(num_blocks);
  if (oracle.a_max) p.a_max = *oracle.a_max;
  if (oracle.exponent) p.exponent = *oracle.exponent;
  if (!oracle.weights.empty()) p.weights = oracle.weights;
  if (!oracle.frontiers.empty()) p.frontiers = oracle.frontiers;
  try {
    p.validate(num_blocks);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  return p;
}

const TrainingBudget& RunConfig::active_budget() const { return budget.use == "final" ? budget.final : budget.search; }

}  // namespace brief
