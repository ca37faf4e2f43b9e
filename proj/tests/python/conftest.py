import os
import sys

# When run from ctest, test the extension in the build tree rather than an
# installed copy.
_build = os.environ.get("BRIEF_PYTHON_BUILD_DIR")
if _build:
    sys.meta_path[:] = [f for f in sys.meta_path if not type(f).__module__.startswith("_editable_skbc_")]
    sys.path.insert(0, _build)
    import brief

    assert os.path.realpath(brief._core.__file__).startswith(os.path.realpath(_build)), brief._core.__file__
