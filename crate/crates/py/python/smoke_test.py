"""Smoke test for the surgact_py extension.

Uses an installed module when available (e.g. after `maturin develop`);
otherwise loads the shared library built by
`cargo build -p surgact-py [--release]`.
"""

import importlib
import importlib.util
import math
import os
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[3]


def load():
    try:
        return importlib.import_module("surgact_py")
    except ImportError:
        pass
    suffix = {"darwin": "dylib", "win32": "dll"}.get(sys.platform, "so")
    prefix = "" if sys.platform == "win32" else "lib"
    candidates = [
        Path(os.environ["SURGACT_PY_LIB"])
    ] if "SURGACT_PY_LIB" in os.environ else [
        ROOT / "target" / profile / f"{prefix}surgact_py.{suffix}" for profile in ("release", "debug")
    ]
    for lib in candidates:
        if lib.exists():
            spec = importlib.util.spec_from_file_location("surgact_py", lib)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("surgact_py not found; run `cargo build -p surgact-py` first")


def main():
    sa = load()

    d = sa.Dataset.generate("CS")
    assert len(d) == 19, len(d)
    stats = d.stats()
    assert stats["interventions"] == 19
    first = d.intervention_ids()[0]
    acts = d.activities(first)
    assert acts and len(acts[0][0]) == 6
    assert all(t0 < t1 for _, t0, t1 in acts)

    with tempfile.TemporaryDirectory() as tmp:
        d.save(tmp)
        again = sa.Dataset.load(os.path.join(tmp, "manifest.json"))
        assert again.activities(first) == acts

    assert sa.mask_bits("IS") == "011011"
    assert sa.gradient_check() < 1e-4

    w = sa.wilcoxon_signed_rank([1.0, 2, 3, 4, 5, 6], [0.0] * 6)
    assert math.isclose(w["p_value"], 2 / 64)
    r = sa.spearman_rho([1.0, 2, 3, 4], [2.0, 4, 6, 8])
    assert math.isclose(r["rho"], 1.0)

    try:
        sa.Dataset.generate("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown preset accepted")

    rows = sa.run_experiment(
        """
        experiment = "E2"
        dataset = "CS"
        configurations = ["IS"]
        runs_per_fold = 1
        max_folds = 2
        [model]
        layers = 1
        hidden = 8
        epochs = 2
        """
    )
    assert len(rows) == 1 and 0.0 <= rows[0]["mean"] <= 1.0
    print("surgact_py smoke test passed:", d, f"IS mean {rows[0]['mean']:.3f}")


if __name__ == "__main__":
    main()
