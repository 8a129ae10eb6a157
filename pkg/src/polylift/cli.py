"""Command line entry point: ``polylift {mesh,solve,study,lifting,probe}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import List, Optional

from .dofs import interpolate
from .harness import CSV_COLUMNS, StudyConfig, emit_report, get_case, named_function
from .lifting import Lifting, random_dofs, verify_all
from .mesh import FAMILIES, MeshError, dump_mesh, generate_mesh, load_mesh, regularity_report
from .norms import (coercivity_bracket, consistency_functional, dual_norm, energy_norm,
                    norm_equivalence_probe)
from .scheme import LOAD_VARIANTS, Discretization, assemble, solve


def _write(data: bytes, out: Optional[str]) -> None:
    if out in (None, "-"):
        sys.stdout.buffer.write(data)
    else:
        Path(out).write_bytes(data)


def _mesh(path: str):
    return load_mesh(Path(path).read_bytes())


def cmd_mesh_gen(args) -> int:
    _write(dump_mesh(generate_mesh(args.family, args.n, args.seed)), args.out)
    return 0


def cmd_mesh_check(args) -> int:
    mesh = _mesh(args.file)
    rep = regularity_report(mesh)
    doc = {
        "checksum": mesh.checksum(), "vertices": mesh.num_vertices, "edges": mesh.num_edges,
        "elements": mesh.num_elements, "h": mesh.h, "area": float(mesh.areas.sum()), **asdict(rep),
    }
    print(json.dumps(doc, indent=1))
    return 0


def cmd_solve(args) -> int:
    disc = Discretization(_mesh(args.mesh), args.k, threads=args.threads)
    f = named_function(args.f, "f")
    g = named_function(args.g, "u")
    uh = solve(assemble(disc, f, g, args.load))
    _write(uh.to_json(), args.out)
    return 0


def cmd_study(args) -> int:
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    for key in ("case", "family", "k", "levels", "seed", "threads"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    if args.load is not None:
        data["loadVariant"] = args.load
    report = StudyConfig.from_dict(data).run()
    _write(emit_report(report, args.format), args.out)
    return 0


def cmd_lifting_verify(args) -> int:
    disc = Discretization(_mesh(args.mesh), args.k)
    rep = verify_all(Lifting(disc), random_dofs(disc, args.samples, args.seed))
    print(json.dumps({"k": args.k, "seed": args.seed, **rep.to_dict()}, indent=1))
    return 0


PROBE_COLUMNS = ("mesh", "h", "k", "energy_error", "dual_Eh", "dual_frakEh",
                 "equivalence_min", "equivalence_max", "coercivity_min", "coercivity_max")


def cmd_probe(args) -> int:
    mesh = _mesh(args.mesh)
    disc = Discretization(mesh, args.k)
    case = get_case(args.case)
    uh = solve(assemble(disc, case.f, case.u, args.load))
    err = energy_norm(disc, uh - interpolate(disc.space, case.u))
    Eh = dual_norm(disc, consistency_functional(disc, "E_h", case.u, f=case.f, load=args.load))
    fr = dual_norm(disc, consistency_functional(disc, "frak_E_h", case.u, laplacian=case.laplacian))
    eq = norm_equivalence_probe(disc, args.samples, args.seed)
    lo, hi = (eq.eig_min, eq.eig_max) if eq.eig_min is not None else (eq.sample_min**2, eq.sample_max**2)
    cmin, cmax = coercivity_bracket(disc)
    row = [mesh.checksum(), mesh.h, args.k, err, Eh, fr, lo, hi, cmin, cmax]
    print(",".join(PROBE_COLUMNS))
    print(",".join(v if isinstance(v, str) else str(v) if isinstance(v, int) else "%.17g" % v for v in row))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polylift", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mesh", help="generate or check meshes").add_subparsers(dest="mesh_command", required=True)
    g = m.add_parser("gen")
    g.add_argument("--family", choices=FAMILIES, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_mesh_gen)
    c = m.add_parser("check")
    c.add_argument("file")
    c.set_defaults(func=cmd_mesh_check)

    s = sub.add_parser("solve", help="solve one Poisson problem")
    s.add_argument("--mesh", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--f", default="zero", help="load: a case name or 'zero'")
    s.add_argument("--g", default="zero", help="Dirichlet data: a case name or 'zero'")
    s.add_argument("--load", choices=LOAD_VARIANTS, default="projected")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    st = sub.add_parser("study", help="convergence study")
    st.add_argument("--config", help="JSON config; flags override its entries")
    st.add_argument("--case")
    st.add_argument("--family", choices=FAMILIES)
    st.add_argument("--k", type=int)
    st.add_argument("--levels", type=lambda s: [int(x) for x in s.split(",")])
    st.add_argument("--seed", type=int)
    st.add_argument("--threads", type=int)
    st.add_argument("--load", choices=LOAD_VARIANTS)
    st.add_argument("--format", choices=("csv", "json"), default="csv")
    st.add_argument("--out")
    st.set_defaults(func=cmd_study)

    lf = sub.add_parser("lifting", help="lifting checks").add_subparsers(dest="lifting_command", required=True)
    v = lf.add_parser("verify")
    v.add_argument("--mesh", required=True)
    v.add_argument("--k", type=int, required=True)
    v.add_argument("--samples", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_lifting_verify)

    pr = sub.add_parser("probe", help="norm equivalence and coercivity probe")
    pr.add_argument("--mesh", required=True)
    pr.add_argument("--k", type=int, required=True)
    pr.add_argument("--case", default="sinsin")
    pr.add_argument("--load", choices=LOAD_VARIANTS, default="projected")
    pr.add_argument("--samples", type=int, default=100)
    pr.add_argument("--seed", type=int, default=0)
    pr.set_defaults(func=cmd_probe)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (MeshError, KeyError, ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"polylift: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "build_parser", "CSV_COLUMNS", "PROBE_COLUMNS"]
