"""Command-line interface: ``vnsplit <group> <command> [options]``.

Every command reads JSON documents (from files or stdin), writes a report
``{command, inputs, verdicts, artifacts, tolerance_used}`` and exits with 0
when all boolean verdicts hold, 1 when one fails, and 2 on errors. A report
can itself be piped into the next command; the first artifact of the
expected kind is used.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import documents as io
from .channels import (
    channel_from_kraus,
    chi_trace,
    heisenberg_semicausal,
    schroedinger_semicausal,
    semi_localisation_residuals,
    semi_localise,
    stinespring,
    verify_semi_localisation,
)
from .errors import NotTracePreserving, ParseError, VnSplitError
from .fixtures import FIXTURES, fixture
from .linops import Tolerance
from .splitmap import (
    Side,
    balanced_decomposition,
    canonical_splitting_map,
    comprehension_balanced_canonical,
    comprehension_nested_canonical,
    comprehension_residual,
    consistent_algebra,
    is_balanced,
    is_lean,
    local_representative,
    reconstruct_balanced,
    strictly_local_algebra,
    strictly_local_representative,
    verify_comprehension,
)
from .vnalg import aw_decomposition, atomic_projectors, center, commutant, trace_over_algebra

EXIT_OK, EXIT_FALSE, EXIT_ERROR = 0, 1, 2


class Context:
    """Inputs read so far, the tolerance and the seed."""

    def __init__(self, args):
        self.args = args
        self.tol = Tolerance(absolute=args.tol) if args.tol is not None else Tolerance.from_env()
        self.seed = args.seed
        self.inputs: dict[str, str] = {}
        self._stdin_used = False

    def load(self, name: str, path, kind: str):
        """Read one input; ``file.json#name`` selects a named report artifact."""
        artifact = None
        if path and "#" in path:
            path, artifact = path.rsplit("#", 1)
        path = path or "-"
        if path == "-":
            if self._stdin_used:
                raise ParseError(f"stdin already consumed; give {name} as a file")
            self._stdin_used = True
        text = io.read_text(path)
        self.inputs[name] = "sha256:" + hashlib.sha256(text.encode()).hexdigest()
        doc = io.parse_json(text)
        doc = _pick(doc, kind, artifact)
        if kind == "matrix":
            return io.matrix_from_doc(doc)
        if kind == "algebra":
            return io.algebra_from_doc(doc, self.tol)
        if kind == "splitting_map":
            return io.splitting_map_from_doc(doc, self.tol)
        if kind == "channel":
            return io.channel_from_doc(doc, self.tol, validate=False)
        if kind == "witness":
            return io.witness_from_doc(doc)
        if kind == "semilocalisation":
            return io.semilocalisation_from_doc(doc, self.tol)
        raise ValueError(kind)

    @property
    def tolerance_used(self) -> dict:
        return {"absolute": self.tol.absolute, "relative_rank": self.tol.relative_rank}


def _pick(doc, kind, artifact=None):
    """Accept the bare document or a report whose artifacts contain one."""
    if isinstance(doc, dict) and "artifacts" in doc and "command" in doc:
        arts = doc["artifacts"]
        if artifact is not None:
            if artifact not in arts:
                raise ParseError(f"report has no artifact named {artifact!r}")
            arts = {artifact: arts[artifact]}
        for art in arts.values():
            if io.document_kind(art) == kind:
                return art
        raise ParseError(f"report has no {kind} artifact")
    found = io.document_kind(doc)
    if found != kind:
        raise ParseError(f"expected a {kind} document, got {found or 'unrecognised JSON'}")
    return doc


def _algebra_doc(a) -> dict:
    return io.algebra_to_doc(a.dim_space, a.basis)


# --- algebra -----------------------------------------------------------------


def cmd_algebra_close(ctx):
    a = ctx.load("algebra", ctx.args.input, "algebra")
    return {"dim": a.dim}, {"algebra": _algebra_doc(a)}


def cmd_algebra_commutant(ctx):
    c = commutant(ctx.load("algebra", ctx.args.input, "algebra"), ctx.tol)
    return {"dim": c.dim}, {"algebra": _algebra_doc(c)}


def cmd_algebra_center(ctx):
    z = center(ctx.load("algebra", ctx.args.input, "algebra"), ctx.tol)
    return {"dim": z.dim}, {"algebra": _algebra_doc(z)}


def cmd_algebra_atoms(ctx):
    a = ctx.load("algebra", ctx.args.input, "algebra")
    atoms = atomic_projectors(center(a, ctx.tol), ctx.seed, ctx.tol)
    return {"count": len(atoms)}, {f"atom_{i}": io.matrix_to_doc(p) for i, p in enumerate(atoms)}


def cmd_algebra_aw(ctx):
    aw = aw_decomposition(ctx.load("algebra", ctx.args.input, "algebra"), ctx.seed, ctx.tol)
    return {"blocks": [list(s) for s in aw.shape]}, {"unitary": io.matrix_to_doc(aw.unitary)}


def cmd_algebra_trace(ctx):
    b = ctx.load("algebra", ctx.args.input, "algebra")
    m = ctx.load("operator", ctx.args.operator, "matrix")
    aw = aw_decomposition(commutant(b, ctx.tol), ctx.seed, ctx.tol)
    red = trace_over_algebra(m, b, aw, ctx.tol)
    return {"blocks": [list(s) for s in aw.shape]}, {"reduced": io.matrix_to_doc(red)}


# --- split -------------------------------------------------------------------


def cmd_split_make(ctx):
    chi = ctx.load("splitting_map", ctx.args.input, "splitting_map")
    return {"isometry": True}, {"splitting_map": io.splitting_map_to_doc(chi)}


def cmd_split_check_local(ctx):
    chi = ctx.load("splitting_map", ctx.args.input, "splitting_map")
    a = ctx.load("operator", ctx.args.operator, "matrix")
    rep = local_representative(chi, a, Side(ctx.args.side), ctx.tol)
    arts = {} if rep is None else {"representative": io.matrix_to_doc(rep)}
    return {"local": rep is not None}, arts


def cmd_split_check_strict(ctx):
    chi = ctx.load("splitting_map", ctx.args.input, "splitting_map")
    a = ctx.load("operator", ctx.args.operator, "matrix")
    rep = strictly_local_representative(chi, a, Side(ctx.args.side), ctx.tol)
    arts = {} if rep is None else {"representative": io.matrix_to_doc(rep)}
    return {"strictly_local": rep is not None}, arts


def cmd_split_cons(ctx):
    chi = ctx.load("splitting_map", ctx.args.input, "splitting_map")
    c = consistent_algebra(chi, Side(ctx.args.side), ctx.tol)
    return {"dim": c.dim}, {"algebra": _algebra_doc(c)}


def cmd_split_stloc(ctx):
    chi = ctx.load("splitting_map", ctx.args.input, "splitting_map")
    s = strictly_local_algebra(chi, Side(ctx.args.side), ctx.tol)
    return {"dim": s.dim}, {"algebra": _algebra_doc(s)}


def cmd_split_balanced(ctx):
    chi = ctx.load("splitting_map", ctx.args.input, "splitting_map")
    return {"balanced": is_balanced(chi, ctx.tol)}, {}


def cmd_split_lean(ctx):
    chi = ctx.load("splitting_map", ctx.args.input, "splitting_map")
    return {"lean": is_lean(chi, ctx.tol)}, {}


def cmd_split_canonical(ctx):
    a = ctx.load("algebra", ctx.args.input, "algebra")
    chi = canonical_splitting_map(a, ctx.seed, ctx.tol)
    return {"d_L": chi.d_L, "d_R": chi.d_R}, {"splitting_map": io.splitting_map_to_doc(chi)}


def cmd_split_comprehend_verify(ctx):
    zeta = ctx.load("zeta", ctx.args.zeta, "splitting_map")
    chi = ctx.load("chi", ctx.args.chi, "splitting_map")
    w = ctx.load("witness", ctx.args.witness, "witness")
    res = comprehension_residual(zeta, chi, w)
    return {"comprehended": verify_comprehension(zeta, chi, w, ctx.tol), "residual": res}, {}


def cmd_split_comprehend_nested(ctx):
    small = ctx.load("small", ctx.args.small, "algebra")
    big = ctx.load("big", ctx.args.big, "algebra")
    nc = comprehension_nested_canonical(small, big, ctx.seed, ctx.tol)
    verdicts = {"comprehended": verify_comprehension(nc.zeta, nc.chi, nc.witness, ctx.tol), "d_M": nc.witness.d_M}
    arts = {
        "zeta": io.splitting_map_to_doc(nc.zeta),
        "chi": io.splitting_map_to_doc(nc.chi),
        "witness": io.witness_to_doc(nc.witness),
    }
    return verdicts, arts


def cmd_split_comprehend_balanced(ctx):
    chi = ctx.load("splitting_map", ctx.args.input, "splitting_map")
    bc = comprehension_balanced_canonical(chi, ctx.seed, ctx.tol)
    verdicts = {
        "forward": verify_comprehension(bc.zeta, chi, bc.forward, ctx.tol),
        "backward": verify_comprehension(chi, bc.zeta, bc.backward, ctx.tol),
    }
    arts = {
        "zeta": io.splitting_map_to_doc(bc.zeta),
        "forward": io.witness_to_doc(bc.forward),
        "backward": io.witness_to_doc(bc.backward),
    }
    return verdicts, arts


def cmd_split_decompose(ctx):
    chi = ctx.load("splitting_map", ctx.args.input, "splitting_map")
    blocks = balanced_decomposition(chi, ctx.seed, ctx.tol)
    recon = reconstruct_balanced(blocks, chi.d_L, chi.d_R)
    arts = {}
    for i, b in enumerate(blocks):
        arts[f"zeta_{i}"] = io.matrix_to_doc(b.zeta)
        arts[f"phi_{i}"] = io.matrix_to_doc(b.phi)
        arts[f"U_L_{i}"] = io.matrix_to_doc(b.U_L)
        arts[f"U_R_{i}"] = io.matrix_to_doc(b.U_R)
    ok = ctx.tol.close(float(np.linalg.norm(recon - chi.isometry)))
    shapes = [[b.d_l, b.d_r, int(round(np.sqrt(len(b.phi))))] for b in blocks]
    return {"reconstructed": ok, "blocks": shapes}, arts


# --- channel -----------------------------------------------------------------


def cmd_channel_validate(ctx):
    e = ctx.load("channel", ctx.args.input, "channel")
    verdicts = {"trace_preserving": True, "completely_positive": True}
    try:
        channel_from_kraus(e.kraus, e.d_in, e.d_out, ctx.tol)
    except NotTracePreserving:
        verdicts["trace_preserving"] = False
    # Kraus form is CP by construction; the Choi spectrum confirms it numerically.
    w = np.linalg.eigvalsh((e.choi + e.choi.conj().T) / 2)
    if w[0] < -1e-9 * max(float(np.real(np.trace(e.choi))), 1.0):
        verdicts["completely_positive"] = False
    verdicts["kraus_rank"] = int(np.sum(w > ctx.tol.cutoff(float(w[-1]))))
    return verdicts, {"choi": io.matrix_to_doc(e.choi)}


def _checked_channel(ctx, name, path):
    e = ctx.load(name, path, "channel")
    return channel_from_kraus(e.kraus, e.d_in, e.d_out, ctx.tol)


def cmd_channel_stinespring(ctx):
    e = _checked_channel(ctx, "channel", ctx.args.input)
    d = stinespring(e, minimal=ctx.args.d_env is None, d_env=ctx.args.d_env, tol=ctx.tol)
    return {"d_env": d.d_env}, {"isometry": io.matrix_to_doc(d.isometry)}


def cmd_channel_chi_trace(ctx):
    chi = ctx.load("chi", ctx.args.chi, "splitting_map")
    rho = ctx.load("operator", ctx.args.operator, "matrix")
    return {}, {"reduced": io.matrix_to_doc(chi_trace(chi, rho))}


def cmd_channel_semicausal(ctx):
    e = _checked_channel(ctx, "channel", ctx.args.input)
    verdicts, arts = {}, {}
    if ctx.args.chi_a_prime and ctx.args.chi_b:
        chi_a = ctx.load("chi_a_prime", ctx.args.chi_a_prime, "splitting_map")
        chi_b = ctx.load("chi_b", ctx.args.chi_b, "splitting_map")
        et = schroedinger_semicausal(e, chi_a, chi_b, ctx.seed, ctx.tol)
        verdicts["semicausal"] = et is not None
        if et is not None:
            arts["reduced_channel"] = io.channel_to_doc(et)
    if ctx.args.algebra_a and ctx.args.algebra_b:
        if e.n_kraus != 1:
            raise ParseError("the Heisenberg check needs a unitary channel (one Kraus operator)")
        a = ctx.load("algebra_a", ctx.args.algebra_a, "algebra")
        b = ctx.load("algebra_b", ctx.args.algebra_b, "algebra")
        verdicts["heisenberg"] = heisenberg_semicausal(e.kraus[0], a, b, ctx.tol)
    if not verdicts:
        raise ParseError("give --chi-a-prime and --chi-b, or --algebra-a and --algebra-b")
    return verdicts, arts


def cmd_channel_semilocalise(ctx):
    e = _checked_channel(ctx, "channel", ctx.args.input)
    chi_a = ctx.load("chi_a_prime", ctx.args.chi_a_prime, "splitting_map")
    chi_b = ctx.load("chi_b", ctx.args.chi_b, "splitting_map")
    s = semi_localise(e, chi_a, chi_b, ctx.seed, ctx.tol)
    return {"verified": verify_semi_localisation(e, s, chi_a, ctx.tol), "d_U": s.d_U}, {
        "semilocalisation": io.semilocalisation_to_doc(s)
    }


def cmd_channel_verify_sl(ctx):
    e = _checked_channel(ctx, "channel", ctx.args.input)
    chi_a = ctx.load("chi_a_prime", ctx.args.chi_a_prime, "splitting_map")
    s = ctx.load("semilocalisation", ctx.args.semilocalisation, "semilocalisation")
    res = semi_localisation_residuals(e, s, chi_a)
    verdicts = {"verified": all(ctx.tol.close(r) for r in res.values())}
    verdicts.update({f"residual_{k}": v for k, v in res.items()})
    return verdicts, {}


# --- wiring --------------------------------------------------------------------


def _add_side(p):
    p.add_argument("--side", choices=["left", "right"], default="left")


def _add_operator(p):
    p.add_argument("--operator", required=True, help="matrix document")


COMMANDS = {
    "algebra": {
        "close": (cmd_algebra_close, "generate the algebra from its generators", "dim", []),
        "commutant": (cmd_algebra_commutant, "commutant of the algebra", "dim", []),
        "center": (cmd_algebra_center, "center of the algebra", "dim", []),
        "atoms": (cmd_algebra_atoms, "minimal central projectors", "count", []),
        "aw": (cmd_algebra_aw, "block decomposition and its unitary", "blocks", []),
        "trace": (cmd_algebra_trace, "trace out the algebra from an operator", "blocks", [_add_operator]),
    },
    "split": {
        "make": (cmd_split_make, "validate a splitting map", "isometry", []),
        "check-local": (cmd_split_check_local, "is the operator local", "local", [_add_side, _add_operator]),
        "check-strict": (
            cmd_split_check_strict,
            "is the operator strictly local",
            "strictly_local",
            [_add_side, _add_operator],
        ),
        "cons": (cmd_split_cons, "consistent on-site algebra", "dim", [_add_side]),
        "stloc": (cmd_split_stloc, "strictly local algebra", "dim", [_add_side]),
        "balanced": (cmd_split_balanced, "is the map balanced", "balanced", []),
        "lean": (cmd_split_lean, "is the map lean", "lean", []),
        "canonical": (cmd_split_canonical, "canonical map of an algebra (input: algebra)", "d_L, d_R", []),
        "comprehend-verify": (
            cmd_split_comprehend_verify,
            "check a comprehension witness",
            "comprehended, residual",
            [
                lambda p: p.add_argument("--zeta", required=True),
                lambda p: p.add_argument("--chi", required=True),
                lambda p: p.add_argument("--witness", required=True),
            ],
        ),
        "comprehend-nested": (
            cmd_split_comprehend_nested,
            "canonical maps and witness for nested algebras",
            "comprehended, d_M",
            [lambda p: p.add_argument("--small", required=True), lambda p: p.add_argument("--big", required=True)],
        ),
        "comprehend-balanced": (
            cmd_split_comprehend_balanced,
            "witnesses between a balanced map and its canonical map",
            "forward, backward",
            [],
        ),
        "decompose": (cmd_split_decompose, "decompose a balanced map into blocks", "reconstructed, blocks", []),
    },
    "channel": {
        "validate": (cmd_channel_validate, "check trace preservation and positivity", "trace_preserving, completely_positive, kraus_rank", []),
        "stinespring": (
            cmd_channel_stinespring,
            "Stinespring isometry",
            "d_env",
            [lambda p: p.add_argument("--d-env", type=int, default=None, help="padded environment size")],
        ),
        "chi-trace": (
            cmd_channel_chi_trace,
            "left reduced operator through a splitting map",
            "(none)",
            [lambda p: p.add_argument("--chi", required=True), _add_operator],
        ),
        "semicausal": (
            cmd_channel_semicausal,
            "semi-causality checks (reduced-state and/or commutator form)",
            "semicausal, heisenberg",
            [
                lambda p: p.add_argument("--chi-a-prime"),
                lambda p: p.add_argument("--chi-b"),
                lambda p: p.add_argument("--algebra-a"),
                lambda p: p.add_argument("--algebra-b"),
            ],
        ),
        "semilocalise": (
            cmd_channel_semilocalise,
            "split a semi-causal channel",
            "verified, d_U",
            [lambda p: p.add_argument("--chi-a-prime", required=True), lambda p: p.add_argument("--chi-b", required=True)],
        ),
        "verify-sl": (
            cmd_channel_verify_sl,
            "check a semi-localisation",
            "verified, residual_reconstruction, residual_image, residual_isometry",
            [
                lambda p: p.add_argument("--chi-a-prime", required=True),
                lambda p: p.add_argument("--semilocalisation", required=True),
            ],
        ),
    },
}


def _global_flags(p, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--tol", type=float, default=default, help="absolute tolerance (overrides VNSPLIT_TOL)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0, help="sampling seed")
    p.add_argument("--out", default=default, help="write the JSON output to this file")
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS if suppress else False, help="print JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vnsplit", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    groups = parser.add_subparsers(dest="group", required=True)
    for group, commands in COMMANDS.items():
        gp = groups.add_parser(group, help=f"{group} commands")
        sub = gp.add_subparsers(dest="command", required=True)
        for name, (fn, summary, verdicts, extras) in commands.items():
            p = sub.add_parser(name, help=summary, description=f"{summary}. Verdicts: {verdicts}.")
            p.add_argument("-i", "--input", default="-", help="input document (default: stdin)")
            for extra in extras:
                extra(p)
            _global_flags(p, suppress=True)
            p.set_defaults(handler=fn)
    fp = groups.add_parser("fixture", help="print a named fixture document")
    fp.add_argument("name", choices=sorted(FIXTURES))
    _global_flags(fp, suppress=True)
    fp.set_defaults(handler=None, command=None)
    return parser


def fixture_document(name: str) -> dict:
    fx = fixture(name)
    kind, value = fx["kind"], fx["value"]
    if kind == "splitting_map":
        return io.splitting_map_to_doc(value)
    if kind == "algebra":
        dim, gens = value
        return io.algebra_to_doc(dim, gens)
    d_in, d_out, kraus = value
    return {"d_in": d_in, "d_out": d_out, "kraus": [io.matrix_to_doc(k) for k in kraus]}


def _human(report: dict) -> str:
    lines = [f"command: {report['command']}"]
    for k, v in report["verdicts"].items():
        lines.append(f"  {k}: {v}")
    for k, v in report["artifacts"].items():
        kind = io.document_kind(v)
        extra = f" {v['rows']}x{v['cols']}" if kind == "matrix" else ""
        lines.append(f"  artifact {k}: {kind}{extra}")
    return "\n".join(lines)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.group == "fixture":
            _emit(io.encode(fixture_document(args.name)), args.out)
            return EXIT_OK
        ctx = Context(args)
        verdicts, artifacts = args.handler(ctx)
    except (VnSplitError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report = {
        "command": f"{args.group} {args.command}",
        "inputs": ctx.inputs,
        "verdicts": verdicts,
        "artifacts": artifacts,
        "tolerance_used": ctx.tolerance_used,
    }
    text = io.encode(report)
    if args.out:
        _emit(text, args.out)
        if not args.json:
            sys.stdout.write(_human(report) + "\n")
    else:
        _emit(text if args.json else _human(report), None)
    failed = any(v is False for v in verdicts.values())
    return EXIT_FALSE if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
