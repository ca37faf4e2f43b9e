#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "brief/accounting.hpp"
#include "brief/cli.hpp"
#include "brief/descriptor.hpp"
#include "brief/ledger.hpp"
#include "brief/lesion.hpp"
#include "brief/rdcurve.hpp"
#include "brief/search.hpp"
#include "brief/trainer.hpp"
#include "brief/zoo.hpp"

namespace py = pybind11;
using namespace brief;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::handle& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

/// Oracle backed by a Python callable (model, config, budget) -> top1.
/// Returning None records a failed evaluation; returning an
/// EvaluationRecord passes it through unchanged.
class CallableOracle final : public Oracle {
 public:
  CallableOracle(py::function fn, std::size_t parallelism) : fn_(std::move(fn)), parallelism_(parallelism) {}
  ~CallableOracle() override {
    py::gil_scoped_acquire gil;
    fn_ = py::function();
  }

  EvaluationRecord evaluate(const ModelSpec& model, const ChannelConfig& config, const TrainingBudget& budget) override {
    py::gil_scoped_acquire gil;
    auto record = make_record(model, config, budget);
    py::object result = fn_(model, config, budget);
    if (result.is_none()) {
      record.status = EvalStatus::failed;
      record.message = "callable returned None";
    } else if (py::isinstance<EvaluationRecord>(result)) {
      return result.cast<EvaluationRecord>();
    } else {
      record.status = EvalStatus::ok;
      record.top1 = result.cast<double>();
    }
    return record;
  }
  std::size_t parallelism() const override { return parallelism_; }
  std::string_view kind() const override { return "python"; }

 private:
  py::function fn_;
  std::size_t parallelism_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Width multiplier search, size accounting and RD curves for convolutional networks";

  py::class_<Ratio>(m, "Ratio")
      .def(py::init<std::int64_t, std::int64_t>(), py::arg("num"), py::arg("den") = 1)
      .def(py::init(&Ratio::parse), py::arg("text"))
      .def(py::init(&Ratio::from_double), py::arg("value"))
      .def_static("parse", &Ratio::parse)
      .def_static("from_double", &Ratio::from_double)
      .def_property_readonly("num", &Ratio::num)
      .def_property_readonly("den", &Ratio::den)
      .def("ceil_mul", &Ratio::ceil_mul)
      .def("floor_mul", &Ratio::floor_mul)
      .def("__float__", &Ratio::value)
      .def("__str__", &Ratio::str)
      .def("__repr__", [](const Ratio& r) { return "Ratio('" + r.str() + "')"; })
      .def("__hash__", [](const Ratio& r) { return py::hash(py::make_tuple(r.num(), r.den())); })
      .def(py::self == py::self)
      .def(py::self < py::self)
      .def(py::self <= py::self)
      .def(py::self > py::self)
      .def(py::self >= py::self);
  py::implicitly_convertible<py::str, Ratio>();
  py::implicitly_convertible<py::int_, Ratio>();
  py::implicitly_convertible<py::float_, Ratio>();

  py::class_<ChannelConfig>(m, "ChannelConfig")
      .def(py::init([](std::vector<int> channels, std::vector<std::size_t> starts) {
             ChannelConfig c{std::move(channels), std::move(starts)};
             c.validate();
             return c;
           }),
           py::arg("channels"), py::arg("macroblock_starts"))
      .def_readonly("channels", &ChannelConfig::channels)
      .def_readonly("macroblock_starts", &ChannelConfig::macroblock_starts)
      .def_property_readonly("num_blocks", &ChannelConfig::num_blocks)
      .def("block_range", &ChannelConfig::block_range)
      .def("__eq__", [](const ChannelConfig& a, const ChannelConfig& b) { return a == b; })
      .def("__repr__", [](const ChannelConfig& c) { return "ChannelConfig(" + to_string(c) + ")"; });

  py::class_<Macroblock>(m, "Macroblock")
      .def_readonly("id", &Macroblock::id)
      .def_readonly("first_channel", &Macroblock::first_channel)
      .def_readonly("end_channel", &Macroblock::end_channel);

  py::class_<MacroblockPartition>(m, "MacroblockPartition")
      .def_readonly("blocks", &MacroblockPartition::blocks)
      .def_readonly("widths", &MacroblockPartition::widths)
      .def_readonly("block_channels", &MacroblockPartition::block_channels)
      .def("__len__", &MacroblockPartition::size);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_readonly("name", &ModelSpec::name)
      .def_readonly("nominal", &ModelSpec::nominal)
      .def_property_readonly("dataset", [](const ModelSpec& s) { return s.metadata.dataset; })
      .def_property_readonly("num_classes", [](const ModelSpec& s) { return s.metadata.num_classes; })
      .def_property_readonly("num_layers", [](const ModelSpec& s) { return s.layers.size(); })
      .def("with_channels", &ModelSpec::with_channels)
      .def("to_json", [](const ModelSpec& s) { return to_python(model_to_json(s)); })
      .def("__repr__", [](const ModelSpec& s) { return "ModelSpec('" + s.name + "', " + to_string(s.nominal) + ")"; });

  m.def("build_sequential_cnn", &build_sequential_cnn, py::arg("depth"), py::arg("block_widths"),
        py::arg("input_channels") = 3, py::arg("num_classes") = 10);
  m.def("build_resnet", &build_resnet, py::arg("depth"), py::arg("num_classes") = 1000);
  m.def("build_mobilenet", &build_mobilenet, py::arg("width_multiplier") = Ratio(1), py::arg("num_classes") = 1000);
  m.def("model_from_json", [](const py::object& obj) { return model_from_json(from_python(obj)); });
  m.def("load_model_descriptor", &load_model_descriptor);
  m.def("partition_macroblocks", &partition_macroblocks);
  m.def("conv_depth", &conv_depth);

  m.def("apply_constant_lesion", &apply_constant_lesion, py::arg("config"), py::arg("index"), py::arg("value"));
  m.def("apply_proportional_lesion", &apply_proportional_lesion, py::arg("config"), py::arg("index"), py::arg("k"));
  m.def("apply_macroblock_scale", &apply_macroblock_scale, py::arg("config"), py::arg("partition"), py::arg("block"),
        py::arg("beta"));
  m.def("apply_alpha_scaling", &apply_alpha_scaling, py::arg("config"), py::arg("alpha"));
  m.def("set_block_width", &set_block_width, py::arg("config"), py::arg("partition"), py::arg("block"),
        py::arg("width"));

  py::class_<BlockSize>(m, "BlockSize")
      .def_readonly("block_id", &BlockSize::block_id)
      .def_readonly("params", &BlockSize::params)
      .def_readonly("buffers", &BlockSize::buffers)
      .def_readonly("bytes", &BlockSize::bytes);

  py::class_<SizeReport>(m, "SizeReport")
      .def_readonly("parameter_count", &SizeReport::parameter_count)
      .def_readonly("buffer_count", &SizeReport::buffer_count)
      .def_readonly("size_bytes", &SizeReport::size_bytes)
      .def_readonly("per_block_breakdown", &SizeReport::per_block_breakdown)
      .def_readonly("head_params", &SizeReport::head_params)
      .def_readonly("head_buffers", &SizeReport::head_buffers)
      .def_property_readonly("stored_scalars", &SizeReport::stored_scalars);

  m.def(
      "count_parameters",
      [](const ModelSpec& spec, const std::optional<ChannelConfig>& config, int bytes_per_scalar, std::int64_t overhead) {
        const SizeOptions options{bytes_per_scalar, overhead};
        return config ? count_parameters(spec, *config, options) : count_parameters(spec, options);
      },
      py::arg("spec"), py::arg("config") = py::none(), py::arg("bytes_per_scalar") = 4, py::arg("overhead") = 0);
  m.def("saving_percent", py::overload_cast<const SizeReport&, const SizeReport&>(&saving_percent));

  py::enum_<EvalStatus>(m, "EvalStatus")
      .value("ok", EvalStatus::ok)
      .value("failed", EvalStatus::failed)
      .value("timeout", EvalStatus::timeout);

  py::class_<TrainingBudget>(m, "TrainingBudget")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainingBudget::epochs)
      .def_readwrite("lr_initial", &TrainingBudget::lr_initial)
      .def_readwrite("lr_milestones", &TrainingBudget::lr_milestones)
      .def_readwrite("lr_divisor", &TrainingBudget::lr_divisor)
      .def_readwrite("optimizer", &TrainingBudget::optimizer)
      .def_readwrite("momentum", &TrainingBudget::momentum)
      .def_readwrite("weight_decay", &TrainingBudget::weight_decay)
      .def_readwrite("batch_size", &TrainingBudget::batch_size)
      .def_readwrite("seed", &TrainingBudget::seed)
      .def("validate", &TrainingBudget::validate)
      .def_static("search_preset", &TrainingBudget::search_preset)
      .def_static("final_preset", &TrainingBudget::final_preset)
      .def_static("cifar_preset", &TrainingBudget::cifar_preset);

  py::class_<EvaluationRecord>(m, "EvaluationRecord")
      .def_readwrite("config_digest", &EvaluationRecord::config_digest)
      .def_readwrite("channels", &EvaluationRecord::channels)
      .def_readwrite("top1", &EvaluationRecord::top1)
      .def_readwrite("top5", &EvaluationRecord::top5)
      .def_readwrite("wall_seconds", &EvaluationRecord::wall_seconds)
      .def_readwrite("status", &EvaluationRecord::status)
      .def_readwrite("message", &EvaluationRecord::message)
      .def_readonly("budget", &EvaluationRecord::budget)
      .def_property_readonly("ok", &EvaluationRecord::ok)
      .def("to_json", [](const EvaluationRecord& r) { return to_python(to_json(r)); });
  m.def("make_record", &make_record);
  m.def("config_digest", &config_digest);
  m.def("distortion", &distortion);

  py::class_<Oracle>(m, "Oracle")
      .def("evaluate", &Oracle::evaluate, py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("parallelism", &Oracle::parallelism)
      .def_property_readonly("kind", [](const Oracle& o) { return std::string(o.kind()); });

  py::class_<CallableOracle, Oracle>(m, "CallableOracle")
      .def(py::init<py::function, std::size_t>(), py::arg("fn"), py::arg("parallelism") = 1);

  py::class_<SurrogateParams>(m, "SurrogateParams")
      .def(py::init<>())
      .def_readwrite("a_max", &SurrogateParams::a_max)
      .def_readwrite("exponent", &SurrogateParams::exponent)
      .def_readwrite("weights", &SurrogateParams::weights)
      .def_readwrite("frontiers", &SurrogateParams::frontiers)
      .def_static("defaults", &SurrogateParams::defaults);
  m.def("surrogate_accuracy", &surrogate_accuracy);
  py::class_<SurrogateOracle, Oracle>(m, "SurrogateOracle")
      .def(py::init<MacroblockPartition, SurrogateParams>(), py::arg("partition"), py::arg("params"));

  py::class_<ExternalTrainerOracle, Oracle>(m, "ExternalTrainerOracle")
      .def(py::init([](std::vector<std::string> command, std::size_t parallelism, double timeout_seconds) {
             return std::make_unique<ExternalTrainerOracle>(
                 TrainerOptions{std::move(command), parallelism, timeout_seconds});
           }),
           py::arg("command"), py::arg("parallelism") = 1, py::arg("timeout_seconds") = 0.0)
      .def_property_readonly("dispatched", &ExternalTrainerOracle::dispatched);

  py::class_<Ledger>(m, "Ledger")
      .def(py::init<std::filesystem::path, bool>(), py::arg("path"), py::arg("writable") = true)
      .def("__len__", &Ledger::size)
      .def("records", &Ledger::records)
      .def("warnings", &Ledger::warnings)
      .def("lookup", py::overload_cast<const std::string&>(&Ledger::lookup, py::const_));
  py::class_<ReplayOracle, Oracle>(m, "ReplayOracle")
      .def(py::init<const Ledger&>(), py::keep_alive<1, 2>());
  py::class_<RecordingOracle, Oracle>(m, "RecordingOracle")
      .def(py::init<Oracle&, Ledger&, bool>(), py::arg("inner"), py::arg("ledger"), py::arg("resume") = true,
           py::keep_alive<1, 2>(), py::keep_alive<1, 3>())
      .def_property_readonly("forwarded", &RecordingOracle::forwarded);
  py::register_exception<MissingEvaluation>(m, "MissingEvaluation", PyExc_LookupError);
  py::register_exception<BaselineUnavailable>(m, "BaselineUnavailable", PyExc_RuntimeError);

  py::enum_<BetaReturnMode>(m, "BetaReturnMode")
      .value("upper_bound", BetaReturnMode::upper_bound)
      .value("last_midpoint", BetaReturnMode::last_midpoint);
  py::enum_<Direction>(m, "Direction").value("backward", Direction::backward).value("forward", Direction::forward);

  py::class_<SearchOptions>(m, "SearchOptions")
      .def(py::init([](double delta, std::size_t scope, BetaReturnMode mode) {
             SearchOptions o{delta, scope, mode};
             o.validate();
             return o;
           }),
           py::arg("delta") = 0.01, py::arg("scope") = 0, py::arg("beta_return") = BetaReturnMode::upper_bound)
      .def_readwrite("delta", &SearchOptions::delta)
      .def_readwrite("scope", &SearchOptions::scope)
      .def_readwrite("beta_return", &SearchOptions::beta_return);

  py::class_<ProbeRecord>(m, "ProbeRecord")
      .def_readonly("block", &ProbeRecord::block)
      .def_readonly("beta", &ProbeRecord::beta)
      .def_readonly("width", &ProbeRecord::width)
      .def_readonly("feasible", &ProbeRecord::feasible)
      .def_readonly("distortion", &ProbeRecord::distortion)
      .def_readonly("evaluation", &ProbeRecord::evaluation);

  py::class_<BlockSearch>(m, "BlockSearch")
      .def_readonly("block", &BlockSearch::block)
      .def_readonly("beta", &BlockSearch::beta)
      .def_readonly("lower", &BlockSearch::lower)
      .def_readonly("upper", &BlockSearch::upper)
      .def_readonly("trace", &BlockSearch::trace)
      .def_readonly("exhausted", &BlockSearch::exhausted);

  py::class_<ReductionResult>(m, "ReductionResult")
      .def_readonly("model_name", &ReductionResult::model_name)
      .def_readonly("direction", &ReductionResult::direction)
      .def_readonly("betas", &ReductionResult::betas)
      .def_readonly("scope", &ReductionResult::scope)
      .def_readonly("nominal_config", &ReductionResult::nominal_config)
      .def_readonly("reduced_config", &ReductionResult::reduced_config)
      .def_readonly("base_report", &ReductionResult::base_report)
      .def_readonly("reduced_report", &ReductionResult::reduced_report)
      .def_readonly("baseline", &ReductionResult::baseline)
      .def_readonly("reduced_evaluation", &ReductionResult::reduced_evaluation)
      .def_readonly("trace", &ReductionResult::trace)
      .def_readonly("exhausted_blocks", &ReductionResult::exhausted_blocks)
      .def_readonly("diagnostics", &ReductionResult::diagnostics)
      .def_property_readonly("saving_percent", &ReductionResult::saving_percent)
      .def_property_readonly("reduced_block_widths", &ReductionResult::reduced_block_widths)
      .def("to_json", [](const ReductionResult& r) { return to_python(to_json(r)); });

  const auto release = py::call_guard<py::gil_scoped_release>();
  m.def("search_macroblock_multiplier", &search_macroblock_multiplier, py::arg("model"), py::arg("partition"),
        py::arg("block"), py::arg("working"), py::arg("baseline_top1"), py::arg("options"), py::arg("oracle"),
        py::arg("budget"), release);
  m.def("brief_backward_reduction", &brief_backward_reduction, py::arg("model"), py::arg("partition"),
        py::arg("options"), py::arg("oracle"), py::arg("budget"), release);
  m.def("forward_reduction", &forward_reduction, py::arg("model"), py::arg("partition"), py::arg("options"),
        py::arg("oracle"), py::arg("budget"), release);

  py::enum_<LesionKind>(m, "LesionKind")
      .value("constant", LesionKind::constant)
      .value("proportional", LesionKind::proportional)
      .value("macroblock_scale", LesionKind::macroblock_scale);
  py::class_<SweepPlan>(m, "SweepPlan")
      .def(py::init([](LesionKind kind, std::vector<Ratio> values, std::vector<std::size_t> indices,
                       TrainingBudget budget) { return SweepPlan{kind, std::move(values), std::move(indices), budget}; }),
           py::arg("kind"), py::arg("values"), py::arg("indices"), py::arg("budget") = TrainingBudget::search_preset());
  py::class_<OneHotPoint>(m, "OneHotPoint")
      .def_readonly("index", &OneHotPoint::index)
      .def_readonly("parameter", &OneHotPoint::parameter)
      .def_readonly("config", &OneHotPoint::config)
      .def_readonly("record", &OneHotPoint::record);
  m.def("default_lesion_indices", &default_lesion_indices);
  m.def("run_onehot_sweep", &run_onehot_sweep, py::arg("model"), py::arg("plan"), py::arg("oracle"), release);

  py::class_<RDPoint>(m, "RDPoint")
      .def_readonly("label", &RDPoint::label)
      .def_readonly("size_bytes", &RDPoint::size_bytes)
      .def_readonly("params", &RDPoint::params)
      .def_readonly("top1", &RDPoint::top1)
      .def_readonly("config_digest", &RDPoint::config_digest)
      .def("__eq__", [](const RDPoint& a, const RDPoint& b) { return a == b; })
      .def("__repr__", [](const RDPoint& p) {
        return "RDPoint('" + p.label + "', size_bytes=" + std::to_string(p.size_bytes) + ", top1=" +
               format_double(p.top1) + ")";
      });
  m.def("build_alpha_curve", &build_alpha_curve, py::arg("model"), py::arg("alphas"), py::arg("oracle"),
        py::arg("budget"), release);
  m.def("build_alpha_plus_brief_curve", &build_alpha_plus_brief_curve, py::arg("model"), py::arg("alphas"),
        py::arg("options"), py::arg("oracle"), py::arg("budget"), release);
  m.def("export_curve", [](const std::vector<RDPoint>& points, const std::filesystem::path& path) {
    export_curve(points, path);
  });
  m.def("import_curve", &import_curve);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        RunOutcome outcome;
        {
          py::gil_scoped_release nogil;
          outcome = run_cli(args, out, err);
        }
        py::dict result;
        result["exit_code"] = outcome.exit_code;
        result["fresh_evaluations"] = outcome.fresh_evaluations;
        result["run_dir"] = outcome.run_dir;
        result["stdout"] = out.str();
        result["stderr"] = err.str();
        return result;
      },
      py::arg("args"));
}
