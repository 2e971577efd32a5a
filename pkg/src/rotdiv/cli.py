"""Experiment driver: JSON specs in, CSV tables / JSON reports / SVG plots out.

Usage:
    rotdiv --spec experiment.json --out results/ [--seed N] [--workers N]
           [--tolerance REL] [--list-presets]

``--spec preset:NAME`` runs one of the shipped presets (see --list-presets).
Outputs are deterministic: re-running an identical spec reproduces CSV and
SVG files byte for byte (plots embed no timestamps and use a fixed hash salt).
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .alphabet import (RotationPattern, difference_set, make_alphabet,
                       random_rotation)
from .diversity import (algorithm1_inequality_total,
                        check_full_diversity_condition, construct_rotation,
                        exhaustive_diversity, lemma1_root_count)
from .linalg import RANK_REL_TOL
from .modulation import Precoder, build_scheme, dft_matrix, scheme_from_json
from .seeding import derive_rng
from .simulate import SimConfig, ber_sweep, papr_ccdf, slope_estimate

_SCHEME_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["plain_ofdm", "precoded_cp_ofdm", "dft_s_ofdm",
                          "dd_grid", "custom"]},
        "m": {"type": "integer", "minimum": 1},
        "mp": {"type": "integer", "minimum": 0},
        "n_doppler": {"type": "integer", "minimum": 1},
        "m_delay": {"type": "integer", "minimum": 1},
        "precoder": {"enum": ["dft", "identity"]},
        "file": {"type": "string"},
    },
    "required": ["kind"],
}

_ROTATION_SCHEMA = {
    "oneOf": [
        {"type": "null"},
        {"type": "object", "properties": {"seed": {"type": "integer", "minimum": 0}},
         "required": ["seed"], "additionalProperties": False},
        {"type": "object", "properties": {"angles": {"type": "array",
                                                     "items": {"type": "number"}}},
         "required": ["angles"], "additionalProperties": False},
    ]
}

_CURVE_SCHEMA = {
    "type": "object",
    "properties": {
        "label": {"type": "string"},
        "scheme": _SCHEME_SCHEMA,
        "rotation": _ROTATION_SCHEMA,
        "detector": {"enum": ["ml", "lzf"]},
    },
    "required": ["label", "scheme"],
}

SPEC_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"enum": ["check-diversity", "construct-rotation", "ber",
                             "papr", "lemma-suite"]},
        "seed": {"type": "integer", "minimum": 0},
        "alphabet": {"enum": ["bpsk", "qpsk", "qam16"]},
        "channel": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["time", "doubly"]},
                "l_taps": {"type": "integer", "minimum": 1},
                "k_taps": {"type": "integer", "minimum": 0},
            },
            "required": ["kind", "l_taps"],
        },
        "snr_db": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "target_errors": {"type": ["integer", "null"], "minimum": 1},
        "max_frames_per_point": {"type": "integer", "minimum": 1},
        "chunk_frames": {"type": "integer", "minimum": 1},
        "curves": {"type": "array", "items": _CURVE_SCHEMA, "minItems": 1},
        "scheme": _SCHEME_SCHEMA,
        "rotation": _ROTATION_SCHEMA,
        "rotation_seeds": {"type": "array", "items": {"type": "integer"}},
        "mode": {"enum": ["precoded_exact", "general_randomized"]},
        "m": {"type": "integer", "minimum": 1},
        "oversample": {"type": "integer", "minimum": 1},
        "frames": {"type": "integer", "minimum": 1},
        "n_pairs": {"type": "integer", "minimum": 1},
        "max_rows": {"type": "integer", "minimum": 1},
        "max_cols": {"type": "integer", "minimum": 1},
        "slope_window_db": {"type": "array", "items": {"type": "number"},
                            "minItems": 2, "maxItems": 2},
    },
    "required": ["command"],
}

PRESETS = {
    "fig2-ber": {
        "description": "BER vs SNR, M=4 time-dispersive L=2, BPSK, ML; "
                       "OFDM and DFT-s-OFDM each with and without rotation",
        "spec": {
            "command": "ber",
            "seed": 2024,
            "alphabet": "bpsk",
            "channel": {"kind": "time", "l_taps": 2},
            "snr_db": [10, 12, 14, 16, 18, 20, 22, 24],
            "target_errors": 200,
            "max_frames_per_point": 400000,
            "curves": [
                {"label": "ofdm", "scheme": {"kind": "plain_ofdm", "m": 4, "mp": 2}},
                {"label": "ofdm-rotated", "scheme": {"kind": "plain_ofdm", "m": 4, "mp": 2},
                 "rotation": {"seed": 7}},
                {"label": "dft-s-ofdm", "scheme": {"kind": "dft_s_ofdm", "m": 4, "mp": 2}},
                {"label": "dft-s-ofdm-rotated", "scheme": {"kind": "dft_s_ofdm", "m": 4, "mp": 2},
                 "rotation": {"seed": 7}},
            ],
        },
    },
    "fig3-ber": {
        "description": "BER vs SNR, M=8 time-dispersive L=4, BPSK, ML; "
                       "DFT-s-OFDM with and without rotation",
        "spec": {
            "command": "ber",
            "seed": 2024,
            "alphabet": "bpsk",
            "channel": {"kind": "time", "l_taps": 4},
            "snr_db": [8, 10, 12, 14, 16, 18],
            "target_errors": 200,
            "max_frames_per_point": 400000,
            "curves": [
                {"label": "dft-s-ofdm", "scheme": {"kind": "dft_s_ofdm", "m": 8, "mp": 4}},
                {"label": "dft-s-ofdm-rotated", "scheme": {"kind": "dft_s_ofdm", "m": 8, "mp": 4},
                 "rotation": {"seed": 7}},
            ],
        },
    },
    "fig5-papr": {
        "description": "PAPR CCDF at M=1024, oversample 8, BPSK: OFDM vs "
                       "DFT-s-OFDM vs rotated DFT-s-OFDM",
        "spec": {
            "command": "papr",
            "seed": 2024,
            "alphabet": "bpsk",
            "m": 1024,
            "oversample": 8,
            "frames": 20000,
            "curves": [
                {"label": "ofdm", "scheme": {"kind": "plain_ofdm"}},
                {"label": "dft-s-ofdm", "scheme": {"kind": "dft_s_ofdm"}},
                {"label": "dft-s-ofdm-rotated", "scheme": {"kind": "dft_s_ofdm"},
                 "rotation": {"seed": 7}},
            ],
        },
    },
    "fig6-dd-check": {
        "description": "Doubly dispersive rank certification, M=8, K=1, L=2, "
                       "delay-Doppler grid with 20 rotation seeds",
        "spec": {
            "command": "check-diversity",
            "seed": 2024,
            "alphabet": "bpsk",
            "channel": {"kind": "doubly", "l_taps": 2, "k_taps": 1},
            "scheme": {"kind": "dd_grid", "m": 8, "mp": 2, "n_doppler": 4, "m_delay": 2},
            "rotation_seeds": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10,
                               11, 12, 13, 14, 15, 16, 17, 18, 19, 20],
        },
    },
}


class SpecError(ValueError):
    def __init__(self, message, field_path=""):
        super().__init__(message)
        self.field_path = field_path


def _build_scheme_from_config(cfg: dict, default_m=None):
    kind = cfg["kind"]
    if kind == "custom":
        if "file" not in cfg:
            raise SpecError("custom schemes need a 'file' entry", "scheme.file")
        return scheme_from_json(Path(cfg["file"]).read_text())
    m = cfg.get("m", default_m)
    if m is None:
        raise SpecError("scheme needs 'm'", "scheme.m")
    mp = cfg.get("mp", 0)
    kwargs = {}
    if kind == "precoded_cp_ofdm":
        name = cfg.get("precoder", "dft")
        mat = dft_matrix(m) if name == "dft" else np.eye(m, dtype=complex)
        kwargs["precoder"] = Precoder(mat, label=name)
    if kind == "dd_grid":
        if "n_doppler" not in cfg or "m_delay" not in cfg:
            raise SpecError("dd_grid schemes need n_doppler and m_delay", "scheme")
        kwargs["n_doppler"] = cfg["n_doppler"]
        kwargs["m_delay"] = cfg["m_delay"]
    return build_scheme(kind, m, mp, **kwargs)


def _rotation_from_config(cfg, m: int):
    if cfg is None:
        return None
    if "seed" in cfg:
        return random_rotation(m, cfg["seed"])
    return RotationPattern(np.mod(np.asarray(cfg["angles"], dtype=float), 2 * np.pi))


def _setup_matplotlib():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "rotdiv"
    return plt


def _save_svg(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def _plot_ber(curves: dict, path: Path):
    plt = _setup_matplotlib()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, curve in curves.items():
        shown = [(s, b) for s, b, e in zip(curve.snr_db, curve.ber, curve.bit_errors)
                 if b > 0]
        if shown:
            ax.semilogy([s for s, _ in shown], [b for _, b in shown],
                        marker="o", label=label)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def _plot_ccdf(curves: dict, path: Path):
    plt = _setup_matplotlib()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, c in curves.items():
        mask = c.ccdf > 0
        ax.semilogy(c.papr_db[mask], c.ccdf[mask], label=label)
    ax.set_xlabel("PAPR (dB)")
    ax.set_ylabel("CCDF")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def _assumption_notes(rel_tol):
    return [
        "tap variance 1/P with P = L*(2K+1) (unit total mean channel energy)",
        "snr = 1/n0 with unit-energy data symbols",
        f"numerical rank: singular values above max(rows, cols)*sigma_max*{rel_tol:.3e}",
    ]


def _run_ber(spec, out: Path, seed, workers, rel_tol):
    alphabet = make_alphabet(spec.get("alphabet", "bpsk"))
    ch = spec["channel"]
    curves = {}
    report = {"command": "ber", "seed": seed, "workers": workers,
              "assumptions": _assumption_notes(rel_tol), "curves": {}}
    for cur in spec["curves"]:
        scheme = _build_scheme_from_config(cur["scheme"])
        rotation = _rotation_from_config(cur.get("rotation"), scheme.m)
        cfg = SimConfig(
            scheme=scheme, alphabet=alphabet, snr_db=spec["snr_db"],
            l_taps=ch["l_taps"], k_taps=ch.get("k_taps", 0),
            channel_kind=ch["kind"], rotation=rotation,
            detector=cur.get("detector", "ml"),
            target_errors=spec.get("target_errors", 200),
            max_frames_per_point=spec.get("max_frames_per_point", 200000),
            chunk_frames=spec.get("chunk_frames", 4096),
            master_seed=seed,
        )
        curve = ber_sweep(cfg)
        label = cur["label"]
        curves[label] = curve
        curve.to_csv(out / f"ber_{label}.csv")
        report["curves"][label] = curve.metadata
        if "slope_window_db" in spec:
            try:
                report["curves"][label]["slope"] = slope_estimate(
                    curve, tuple(spec["slope_window_db"]))
            except ValueError as exc:
                report["curves"][label]["slope_error"] = str(exc)
    _plot_ber(curves, out / "ber.svg")
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return report


def _run_papr(spec, out: Path, seed, workers, rel_tol):
    alphabet = make_alphabet(spec.get("alphabet", "bpsk"))
    m = spec["m"]
    curves = {}
    report = {"command": "papr", "seed": seed, "m": m,
              "oversample": spec.get("oversample", 8),
              "frames": spec.get("frames", 10000), "curves": {}}
    for cur in spec["curves"]:
        label = cur["label"]
        kind = cur["scheme"]["kind"]
        precoder = None
        if kind == "precoded_cp_ofdm":
            precoder = Precoder(dft_matrix(m) if cur["scheme"].get("precoder", "dft") == "dft"
                                else np.eye(m, dtype=complex))
        rotation = _rotation_from_config(cur.get("rotation"), m)
        c = papr_ccdf(kind, m, report["oversample"], report["frames"], seed,
                      alphabet, phi=rotation, precoder=precoder)
        curves[label] = c
        c.to_csv(out / f"papr_{label}.csv")
        report["curves"][label] = {
            "papr_db_at_1e-3": (c.papr_at_ccdf(1e-3)
                                if c.ccdf.min() <= 1e-3 else None),
            "rotation": None if rotation is None else list(map(float, rotation.angles)),
        }
    _plot_ccdf(curves, out / "papr.svg")
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return report


def _run_check_diversity(spec, out: Path, seed, workers, rel_tol):
    alphabet = make_alphabet(spec.get("alphabet", "bpsk"))
    ch = spec["channel"]
    scheme = _build_scheme_from_config(spec["scheme"])
    l_taps, k_taps = ch["l_taps"], ch.get("k_taps", 0)
    passed, ranks, lower = check_full_diversity_condition(scheme, l_taps, k_taps,
                                                          rel_tol=rel_tol)
    full = l_taps * (2 * k_taps + 1)
    report = {
        "command": "check-diversity",
        "seed": seed,
        "scheme": spec["scheme"],
        "channel": ch,
        "condition_pass": passed,
        "full_order": full,
        "per_q_ranks": ranks,
        "random_rotation_lower_bound": lower,
        "assumptions": _assumption_notes(rel_tol),
        "exhaustive": [],
    }
    b = difference_set(alphabet)
    for rot_seed in spec.get("rotation_seeds", []):
        rot = random_rotation(scheme.m, rot_seed)
        rep = exhaustive_diversity(scheme, rot, b, l_taps, k_taps, rel_tol=rel_tol)
        report["exhaustive"].append({"rotation_seed": rot_seed, "order": rep.order,
                                     "n_vectors_checked": rep.n_vectors_checked})
    with open(out / "ranks.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "rank", "full"])
        for q, r in enumerate(ranks):
            w.writerow([q, r, full])
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return report


def _run_construct_rotation(spec, out: Path, seed, workers, rel_tol):
    alphabet = make_alphabet(spec.get("alphabet", "bpsk"))
    b = difference_set(alphabet)
    mode = spec.get("mode", "precoded_exact")
    if mode == "precoded_exact":
        m = spec["m"]
        target = Precoder(dft_matrix(m))
        pattern, cert = construct_rotation(target, b, mode, seed=seed)
    else:
        scheme = _build_scheme_from_config(spec["scheme"])
        ch = spec["channel"]
        pattern, cert = construct_rotation(scheme, b, mode, l_max=ch["l_taps"],
                                           k_max=ch.get("k_taps", 0), seed=seed)
    (out / "rotation.json").write_text(pattern.to_json())
    (out / "certificate.json").write_text(json.dumps(cert, indent=2, sort_keys=True))
    return cert


def _run_lemma_suite(spec, out: Path, seed, workers, rel_tol):
    n_pairs = spec.get("n_pairs", 100)
    max_rows = spec.get("max_rows", 6)
    max_cols = spec.get("max_cols", 4)
    rng = derive_rng(seed, 99)
    rows_list = []
    for i in range(n_pairs):
        rows = int(rng.integers(2, max_rows + 1))
        cols = int(rng.integers(1, min(rows, max_cols) + 1))
        a = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
        bmat = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
        n_roots, const_ok = lemma1_root_count(a, bmat, seed=seed + i)
        rows_list.append([i, rows, cols, n_roots, max(rows, cols), const_ok])
    with open(out / "lemma_suite.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair", "rows", "cols", "distinct_roots", "max_dim",
                    "constant_coeff_nonzero"])
        w.writerows(rows_list)
    report = {
        "command": "lemma-suite",
        "seed": seed,
        "n_pairs": n_pairs,
        "all_within_bound": all(r[3] <= r[4] for r in rows_list),
        "all_constant_nonzero": all(r[5] for r in rows_list),
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return report


_RUNNERS = {
    "ber": _run_ber,
    "papr": _run_papr,
    "check-diversity": _run_check_diversity,
    "construct-rotation": _run_construct_rotation,
    "lemma-suite": _run_lemma_suite,
}


def run_experiment(spec: dict, out_dir, seed: int | None = None,
                   workers: int | None = None, tolerance: float | None = None):
    """Validate a spec dict, run the requested command, write artifacts.

    Returns the report dict.  Raises SpecError for schema violations.
    """
    try:
        jsonschema.validate(spec, SPEC_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path)
        raise SpecError(exc.message, field_path=path) from exc
    command = spec["command"]
    needed = {"ber": ["channel", "snr_db", "curves"],
              "papr": ["m", "curves"],
              "check-diversity": ["scheme", "channel"],
              "construct-rotation": [],
              "lemma-suite": []}
    for key in needed[command]:
        if key not in spec:
            raise SpecError(f"command {command!r} requires field {key!r}", key)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eff_seed = seed if seed is not None else spec.get("seed", 0)
    eff_workers = workers if workers is not None else (os.cpu_count() or 1)
    rel_tol = tolerance if tolerance is not None else RANK_REL_TOL
    return _RUNNERS[command](spec, out, eff_seed, eff_workers, rel_tol)


def _error_json(exc, kind="error"):
    payload = {"error": {"type": kind, "message": str(exc)}}
    if isinstance(exc, SpecError) and exc.field_path:
        payload["error"]["field"] = exc.field_path
    return json.dumps(payload, indent=2)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rotdiv",
        description="Run diversity-certification and Monte Carlo experiments "
                    "from a JSON spec.")
    parser.add_argument("--spec", help="spec file path, or preset:NAME")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed override (64-bit unsigned)")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker-count hint; results are independent of it")
    parser.add_argument("--tolerance", type=float, default=None,
                        help="relative numerical-rank tolerance "
                             f"(default {RANK_REL_TOL:.3e})")
    parser.add_argument("--list-presets", action="store_true",
                        help="list shipped experiment presets and exit")
    args = parser.parse_args(argv)

    if args.list_presets:
        for name, preset in PRESETS.items():
            print(f"{name}: {preset['description']}")
        return 0
    if args.spec is None:
        print(_error_json(SpecError("--spec is required", "spec")), file=sys.stderr)
        return 2

    try:
        if args.spec.startswith("preset:"):
            name = args.spec.split(":", 1)[1]
            if name not in PRESETS:
                raise SpecError(f"unknown preset {name!r}; see --list-presets", "spec")
            spec = copy.deepcopy(PRESETS[name]["spec"])
        else:
            try:
                spec = json.loads(Path(args.spec).read_text())
            except json.JSONDecodeError as exc:
                raise SpecError(f"spec is not valid JSON: {exc}", "spec") from exc
            except OSError as exc:
                raise SpecError(f"cannot read spec: {exc}", "spec") from exc
        run_experiment(spec, args.out, seed=args.seed, workers=args.workers,
                       tolerance=args.tolerance)
    except SpecError as exc:
        msg = _error_json(exc, "spec-validation")
        print(msg, file=sys.stderr)
        try:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "error.json").write_text(msg)
        except OSError:
            pass
        return 2
    except Exception as exc:  # noqa: BLE001 - surface as machine-readable error
        msg = _error_json(exc, type(exc).__name__)
        print(msg, file=sys.stderr)
        try:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "error.json").write_text(msg)
        except OSError:
            pass
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
