"""Smoke test for the fvqoc Python extension.

Build the extension first:

    cargo build --release -p fvqoc-python --features extension-module

then run `python3 python/smoke_test.py`. The script copies the built shared
library next to a temporary package path and imports it from there; set
FVQOC_LIB to point at a different build.
"""

import json
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def locate_library() -> Path:
    if "FVQOC_LIB" in os.environ:
        return Path(os.environ["FVQOC_LIB"])
    for name in ("libfvqoc.so", "libfvqoc.dylib", "fvqoc.dll"):
        candidate = ROOT / "target" / "release" / name
        if candidate.exists():
            return candidate
    sys.exit("extension not built; see the module docstring")


def import_extension(tmp: Path):
    lib = locate_library()
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    shutil.copy(lib, tmp / f"fvqoc{suffix}")
    sys.path.insert(0, str(tmp))
    import fvqoc

    return fvqoc


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        fvqoc = import_extension(tmp)

        x, dw = fvqoc.sample_ou_path(0.1, 0.1, 0.01, 100, seed=3)
        assert len(x) == 101 and len(dw) == 100
        assert x == fvqoc.sample_ou_path(0.1, 0.1, 0.01, 100, seed=3)[0]

        assert fvqoc.expected_cos(1.0, 0.0, 0.1, 0.1) == 1.0
        assert abs(fvqoc.ou_even_moment(1, 1e6, 0.1, 0.1) - 0.05) < 1e-12

        u = fvqoc.haar_random_unitary(2, 11)
        for i in range(2):
            for j in range(2):
                s = sum(u[k][i].conjugate() * u[k][j] for k in range(2))
                assert abs(s - (1.0 if i == j else 0.0)) < 1e-12

        gamma = 0.1
        mean, stderr = fvqoc.dephasing_ensemble(gamma, 1e-3, 500, 2000, 1)
        exact = 0.5 * (1.0 + math.exp(-2.0 * gamma**2 * 0.5))
        assert abs(mean[-1] - exact) <= 4.0 * stderr[-1], (mean[-1], exact, stderr[-1])

        config = json.loads((ROOT / "configs" / "fixed_noise.json").read_text())
        config["problem"]["schedule"]["iterations"] = 2
        config["problem"]["trials"] = {"gradient": 8, "evaluation": 8}
        config["problem"]["methods"] = ["vqoc", "fvqoc_continuous"]
        out = tmp / "run"
        summary = json.loads(fvqoc.run_config(json.dumps(config), str(out)))
        assert set(summary["final_error"]) == {"vqoc", "fvqoc_continuous"}
        for name in ("config.json", "seeds.json", "summary.json", "history_vqoc.csv"):
            assert (out / name).exists(), name

        try:
            fvqoc.run_config('{"experiment": "optimize", "bogus": 1}', str(out))
        except ValueError as err:
            assert "bogus" in str(err)
        else:
            raise AssertionError("unknown key accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
