"""Command-line surface: synth, identify, project, expand, patch, verify, inspect.

Every command is a pure function of its input files, flags, and --seed;
re-runs produce byte-identical outputs. Logs go to stderr, reports to
stdout (or --output/--report-file). Exit codes: 0 success, 1
verification failure, 2 argument error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ArgumentError, DataError, SaferError, VerificationError
from .expansion import ExpansionConfig, expand, features_from_store
from .metrics import accuracy_summary, feature_set_from_store, read_predictions, style_similarity
from .patcher import (
    DEFAULT_PATTERN,
    LayerSelector,
    patch_checkpoint,
    verify_patch,
)
from .projector import (
    amplify_projector,
    compose,
    orthogonalized_removal_projector,
    projector_from_store,
    projector_to_store,
    removal_projector,
)
from .store import NamedTensor, TensorStore, load_store, save_store
from .subspace import (
    basis_from_store,
    basis_to_store,
    embedding_from_store,
    embedding_to_store,
    identify_subspace,
)
from .synth import SyntheticSpec, generate

log = logging.getLogger("safer")

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_ARGUMENT = 2
EXIT_DATA = 3


def _echo_config(args: argparse.Namespace) -> None:
    resolved = {
        k: v for k, v in sorted(vars(args).items())
        if k != "func" and not k.startswith("_")
    }
    log.info("config: %s", json.dumps(resolved, default=str, sort_keys=True))


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(path: str) -> TensorStore:
    return load_store(path)


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        d=args.d,
        N=args.N,
        sigma_alpha=args.sigma_alpha,
        object_scale=args.object_scale,
        noise_scale=args.noise_scale,
        seed=args.seed,
    )
    emb, v_c, alpha = generate(spec)
    store = embedding_to_store(emb, label=args.label)
    store.metadata.update(spec.metadata())
    store.add(NamedTensor("ground_truth.v_c", v_c, dtype="float64"))
    store.add(NamedTensor("ground_truth.alpha", alpha, dtype="float64"))
    save_store(store, args.output)
    log.info("wrote %d x %d synthetic embeddings to %s", spec.N, spec.d, args.output)
    return EXIT_OK


def cmd_identify(args) -> int:
    store = _load(args.embeddings)
    emb, label = embedding_from_store(store)
    if args.label is not None:
        label = args.label
    basis = identify_subspace(emb, rank=args.rank, center=args.center, label=label)
    out = basis_to_store(basis, centered=args.center or emb.centered)
    save_store(out, args.output)
    log.info(
        "identified rank-%d subspace (dim %d, ratio[0]=%.4f) -> %s",
        basis.rank, basis.dim, basis.explained_variance_ratio[0], args.output,
    )
    return EXIT_OK


def cmd_project(args) -> int:
    bases = [basis_from_store(_load(path)) for path in args.basis]
    if args.mode == "amplify":
        if len(bases) != 1:
            raise ArgumentError("amplify mode takes exactly one basis")
        if args.lam == 0.0:
            log.warning("lambda 0 produces the identity projector (no-op)")
        proj = amplify_projector(bases[0], args.lam, allow_negative=args.allow_negative)
    elif args.orthogonalize:
        proj = orthogonalized_removal_projector(bases)
    else:
        proj = compose([removal_projector(b) for b in bases])
    save_store(projector_to_store(proj), args.output)
    log.info("wrote %s projector (dim %d, sources %s) to %s",
             proj.mode, proj.dim, proj.sources, args.output)
    return EXIT_OK


def cmd_expand(args) -> int:
    anchor = basis_from_store(_load(args.anchor))
    candidates = [basis_from_store(_load(path)) for path in args.candidates]
    features = {f.label: f for f in features_from_store(_load(args.features))}

    def feature_for(label: str):
        if label not in features:
            raise DataError(f"feature dump has no entry labeled {label!r}")
        return features[label]

    cfg = ExpansionConfig(tau=args.tau, anchor_policy=args.policy, max_rank=args.max_rank)
    log.info("expansion threshold tau=%s policy=%s anchor=%r", args.tau, args.policy, anchor.label)
    proj, records = expand(
        anchor,
        feature_for(anchor.label),
        [(feature_for(b.label), b) for b in candidates],
        cfg,
    )
    if args.orthogonalize:
        admitted = {r.label for r in records if r.admitted}
        kept = [anchor] + [b for b in candidates if b.label in admitted]
        proj = orthogonalized_removal_projector(kept)
    save_store(projector_to_store(proj), args.output)
    _emit("".join(r.to_json_line() + "\n" for r in records), args.log_file)
    log.info("admitted %d of %d candidates -> %s",
             sum(r.admitted for r in records), len(records), args.output)
    return EXIT_OK


def _selector_from_args(args, proj) -> LayerSelector:
    expected = args.expected_dim if args.expected_dim is not None else proj.dim
    return LayerSelector(pattern=args.selector, expected_dim=expected, orientation=args.orientation)


def cmd_patch(args) -> int:
    in_path, out_path = Path(args.checkpoint).resolve(), Path(args.output).resolve()
    if in_path == out_path:
        raise ArgumentError("refusing to overwrite the input checkpoint; pick a different --output")
    ckpt = _load(args.checkpoint)
    proj = projector_from_store(_load(args.projector))
    sel = _selector_from_args(args, proj)
    patched, report = patch_checkpoint(ckpt, proj, sel)
    save_store(patched, args.output)
    _emit(report.to_text(), args.report_file)
    log.info("patched %d tensors -> %s", report.count, args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    original = _load(args.original)
    patched = _load(args.patched)
    proj = projector_from_store(_load(args.projector))
    sel = _selector_from_args(args, proj)
    report = verify_patch(original, patched, proj, sel, trials=args.trials, seed=args.seed)
    lines = [
        f"{r.name}: orientation={r.orientation} max_error={r.max_error:.3e} tol={r.tolerance:.0e} ok"
        for r in report.records
    ]
    lines.append(
        f"verified {len(report.records)} patched and {report.unmatched_checked} untouched tensors"
    )
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def _spectrum_lines(ratios, top: int) -> list[str]:
    return [f"{i}: {float(r):.4f}" for i, r in enumerate(ratios[:top])]


def cmd_inspect(args) -> int:
    store = _load(args.path)
    lines: list[str] = []
    if "embeddings" in store:
        emb, label = embedding_from_store(store)
        values = emb.center().values if args.center else emb.values
        s = np.linalg.svd(values, compute_uv=False)
        total = float(np.sum(s**2))
        ratios = s**2 / total if total > 0 else np.zeros_like(s)
        lines.append(f"embeddings: {emb.rows} x {emb.dim} (label {label!r})")
        lines.append(f"spectrum (top {args.top} explained variance ratios):")
        lines.extend(_spectrum_lines(ratios, args.top))
    elif "explained_variance_ratio" in store:
        basis = basis_from_store(store)
        lines.append(f"basis: dim {basis.dim} rank {basis.rank} (label {basis.label!r})")
        lines.append(f"spectrum (top {args.top} explained variance ratios):")
        lines.extend(_spectrum_lines(basis.explained_variance_ratio, args.top))
    else:
        lines.append(f"tensors: {len(store)}")
        for name in store.names():
            t = store[name]
            lines.append(f"{name} {list(t.shape)} {t.dtype}")
    if store.metadata:
        lines.append("metadata:")
        lines.extend(f"{k} = {store.metadata[k]}" for k in sorted(store.metadata))
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_style_sim(args) -> int:
    ref = feature_set_from_store(_load(args.ref))
    fake = feature_set_from_store(_load(args.fake))
    score = style_similarity(ref, fake)
    _emit(f"style_similarity: {score:.6f}\n", args.output)
    return EXIT_OK


def cmd_accuracy(args) -> int:
    try:
        text = Path(args.predictions).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {args.predictions}: {exc}") from exc
    acc, counts = accuracy_summary(read_predictions(text), args.target)
    payload = {"target": args.target, "accuracy": acc, "counts": counts}
    _emit(json.dumps(payload, sort_keys=True) + "\n", args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safer",
        description="Erase or amplify concepts in diffusion models via embedding-subspace projection.",
    )
    parser.add_argument("--version", action="version", version=f"safer {__version__}")
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    parser.add_argument("--log-level", default="info",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic embedding dump with ground truth")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--N", type=int, default=128)
    p.add_argument("--sigma-alpha", type=float, default=1.0)
    p.add_argument("--object-scale", type=float, default=0.1)
    p.add_argument("--noise-scale", type=float, default=0.1)
    p.add_argument("--label", default="synthetic-concept")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("identify", help="estimate a concept subspace from an embedding dump")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--center", action="store_true")
    p.add_argument("--label", default=None, help="override the concept label from the dump")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("project", help="build a removal/amplify/composed projector from bases")
    p.add_argument("--basis", action="append", required=True,
                   help="basis file; repeat to compose in argument order")
    p.add_argument("--mode", choices=["remove", "amplify"], default="remove")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="amplification coefficient (amplify mode)")
    p.add_argument("--allow-negative", action="store_true")
    p.add_argument("--orthogonalize", action="store_true",
                   help="merge bases into one joint subspace instead of an ordered product")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("expand", help="progressively expand the erased subspace over references")
    p.add_argument("--anchor", required=True, help="anchor basis file")
    p.add_argument("--candidates", nargs="*", default=[], help="candidate basis files, in order")
    p.add_argument("--features", required=True, help="feature dump pairing labels to vectors")
    p.add_argument("--tau", type=float, required=True,
                   help="admission threshold in [-1, 1]; typical 0.85")
    p.add_argument("--policy", choices=["first", "any-admitted"], default="first")
    p.add_argument("--max-rank", type=int, default=None)
    p.add_argument("--orthogonalize", action="store_true")
    p.add_argument("--log-file", default=None, help="admission log destination (default stdout)")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("patch", help="merge a projector into checkpoint weights")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--projector", required=True)
    p.add_argument("--selector", default=DEFAULT_PATTERN,
                   help=f"tensor-name regex (default {DEFAULT_PATTERN!r})")
    p.add_argument("--orientation", choices=["auto", "input-rows", "input-cols"], default="auto")
    p.add_argument("--expected-dim", type=int, default=None,
                   help="embedding axis extent (default: projector dim)")
    p.add_argument("--report-file", default=None, help="patch report destination (default stdout)")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_patch)

    p = sub.add_parser("verify", help="check a patched checkpoint against the behavioral contract")
    p.add_argument("--original", required=True)
    p.add_argument("--patched", required=True)
    p.add_argument("--projector", required=True)
    p.add_argument("--selector", default=DEFAULT_PATTERN)
    p.add_argument("--orientation", choices=["auto", "input-rows", "input-cols"], default="auto")
    p.add_argument("--expected-dim", type=int, default=None)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("inspect", help="print the spectrum or tensor listing of a store")
    p.add_argument("path")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--center", action="store_true")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("style-sim", help="mean best-match cosine between two feature dumps")
    p.add_argument("--ref", required=True)
    p.add_argument("--fake", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_style_sim)

    p = sub.add_parser("accuracy", help="classification-accuracy summary of a predictions file")
    p.add_argument("--predictions", required=True, help="line-delimited `id<TAB>label` records")
    p.add_argument("--target", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_accuracy)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    _echo_config(args)
    try:
        return args.func(args)
    except VerificationError as exc:
        log.error("%s", exc)
        if exc.failures:
            sys.stdout.write("\n".join(exc.failures) + "\n")
        return EXIT_VERIFICATION
    except ArgumentError as exc:
        log.error("%s", exc)
        return EXIT_ARGUMENT
    except DataError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except SaferError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
