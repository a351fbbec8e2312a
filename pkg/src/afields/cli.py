"""Command-line interface: ``afields <command> ...``; every report is JSON."""

from __future__ import annotations

import json
import sys
from fractions import Fraction
from pathlib import Path

import click
import numpy as np

from .algebroid import sample_box, validate_structure_equations
from .errors import AfieldsError, JacobiViolation, SingularHessian
from .grid import field_from_csv, field_to_csv
from .hamiltonian import hamilton_residuals
from .lagrangian import euler_lagrange_residuals, is_regular
from .legendre import LegendreMap, induced_hamiltonian, legendre_field, solution_transport
from .models import ModelDescriptor, load_model
from .prolongation import Side, prolong, random_whitney_points
from .solver import (convergence_study, manufactured_slice, march_error, march_evolutionary,
                     wave_field)


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, default=float)
    if out:
        Path(out).write_text(text + "\n")
    else:
        click.echo(text)


def _model(name: str) -> ModelDescriptor:
    try:
        return load_model(name)
    except JacobiViolation as exc:
        _emit({"model": name, "pass": False, "error": "JacobiViolation", "message": str(exc)}, None)
        sys.exit(1)
    except (ValueError, OSError, KeyError) as exc:
        raise click.BadParameter(str(exc), param_hint="MODEL") from exc


def _periodic_flags(axes: str | None, k: int) -> tuple[bool, ...]:
    chosen = {int(a) for a in axes.split(",") if a.strip()} if axes else set()
    if any(not 1 <= a <= k for a in chosen):
        raise click.BadParameter(f"periodic axes must lie in 1..{k}", param_hint="--periodic")
    return tuple(A + 1 in chosen for A in range(k))


def _read_field(path: str, periodic: str | None, desc: ModelDescriptor):
    with open(path) as fh:
        k = sum(1 for c in fh.readline().strip().split(",") if c.startswith("t"))
    try:
        field = field_from_csv(path, _periodic_flags(periodic, k))
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="FIELD_CSV") from exc
    sys_ = desc.lagrangian or desc.hamiltonian
    if (field.base_dim, field.rank) != (desc.algebroid.base_dim, desc.algebroid.rank) or (
            sys_ is not None and field.k != sys_.k):
        raise click.BadParameter(
            f"field has n={field.base_dim}, m={field.rank}, k={field.k}; model {desc.name} needs "
            f"n={desc.algebroid.base_dim}, m={desc.algebroid.rank}, k={sys_.k if sys_ else '?'}",
            param_hint="FIELD_CSV")
    return field


def _parse_spacings(text: str) -> list[float]:
    try:
        return [float(Fraction(s.strip())) for s in text.split(",") if s.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise click.BadParameter(str(exc), param_hint="--h-list") from exc


def _structure(alg, samples: int, tol: float, rng) -> dict:
    return validate_structure_equations(alg, sample_box(alg.base_dim, samples, rng), tol).to_dict()


@click.group()
def main() -> None:
    """Field theories on Lie algebroids: validation, residuals, marching, Legendre transport."""


@main.command()
@click.argument("model")
@click.option("--samples", default=100, show_default=True, help="Random points in [-1,1]^n.")
@click.option("--seed", default=0, show_default=True)
@click.option("--tol", default=1e-8, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write the JSON report here.")
def validate(model: str, samples: int, seed: int, tol: float, out: str | None) -> None:
    """Check the structure equations of MODEL (and of its prolongation)."""
    desc = _model(model)
    rng = np.random.default_rng(seed)
    report = {"model": desc.name,
              "algebroid": _structure(desc.algebroid, samples, tol, rng)}
    sys_ = desc.lagrangian or desc.hamiltonian
    if sys_ is not None:
        side = Side.LAGRANGIAN if desc.lagrangian else Side.HAMILTONIAN
        pro = prolong(desc.algebroid, sys_.k, side)
        report["prolongation"] = _structure(pro.algebroid, samples, tol, rng)
    if desc.lagrangian is not None:
        lag = desc.lagrangian
        pts = random_whitney_points(lag.alg, lag.k, samples, rng)
        w = lag.derivatives(np.stack([b.flat() for b in pts]), order=2).dyy
        mk = lag.alg.rank * lag.k
        report["regular_fraction"] = float(np.mean([is_regular(x.reshape(mk, mk)) for x in w]))
    ok = all(v["pass"] for key, v in report.items() if isinstance(v, dict))
    report["pass"] = ok
    _emit(report, out)
    sys.exit(0 if ok else 1)


@main.command()
@click.argument("model")
@click.argument("field_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--periodic", help="Comma-separated 1-based periodic axes, e.g. '2'.")
@click.option("--nodes/--no-nodes", default=False, help="Include per-node residuals.")
@click.option("--out", type=click.Path(dir_okay=False))
def residual(model: str, field_csv: str, periodic: str | None, nodes: bool, out: str | None) -> None:
    """Field-equation and morphism residuals of a CSV grid field."""
    desc = _model(model)
    field = _read_field(field_csv, periodic, desc)
    if field.side is Side.LAGRANGIAN:
        if desc.lagrangian is None:
            raise click.UsageError(f"model {desc.name} has no Lagrangian")
        res = euler_lagrange_residuals(desc.lagrangian, field)
        kind = "euler-lagrange"
    else:
        ham = desc.hamiltonian
        if ham is None and desc.lagrangian is not None:
            ham = induced_hamiltonian(LegendreMap(desc.lagrangian))
        if ham is None:
            raise click.UsageError(f"model {desc.name} has no Hamiltonian")
        res = hamilton_residuals(ham, field)
        kind = "hamilton"
    report = {"model": desc.name, "equations": kind, "norms": res.norms()}
    if nodes:
        report["nodes"] = [{"node": [int(i) for i in nd], "primary": np.asarray(p).tolist(),
                            "anchor_res": np.asarray(a).tolist(), "morphism_res": np.asarray(b).tolist()}
                           for nd, p, a, b in zip(res.nodes, res.primary, res.anchor_res, res.morphism_res)]
    _emit(report, out)


@main.command()
@click.argument("model")
@click.option("--steps", type=int, help="Marching steps in t1 (default: up to t1 = 1).")
@click.option("--h", "h", type=float, default=1 / 32, show_default=True, help="Slice spacing in t2.")
@click.option("--dt", type=float, help="Step in t1 (default h/2).")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="CSV file for the field.")
@click.option("--report", type=click.Path(dir_okay=False), help="Write the JSON report here.")
def solve(model: str, steps: int | None, h: float, dt: float | None, out: str, report: str | None) -> None:
    """March manufactured initial data of an evolutionary MODEL in t1."""
    desc = _model(model)
    if desc.evolution is None or desc.lagrangian is None:
        raise click.UsageError(f"model {desc.name} is not evolutionary")
    dt = dt or h / 2
    steps = steps if steps is not None else int(round(1.0 / dt))
    init = manufactured_slice(desc.lagrangian, desc.evolution, h)
    try:
        field = march_evolutionary(desc.lagrangian, desc.evolution, init.q0, init.y0, (dt, h), steps)
    except AfieldsError as exc:
        _emit({"model": desc.name, "error": type(exc).__name__, "message": str(exc)}, report)
        sys.exit(1)
    field_to_csv(field, out)
    res = euler_lagrange_residuals(desc.lagrangian, field)
    rep = {"model": desc.name, "tag": desc.evolution, "steps": steps, "spacing": list(field.spacing),
           "field": out, "residual": res.norms()}
    if init.exact is not None:
        rep["max_error_vs_exact"] = march_error(field, init.exact)
    _emit(rep, report)


@main.command()
@click.argument("model")
@click.argument("field_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--periodic", help="Comma-separated 1-based periodic axes.")
@click.option("--field-out", type=click.Path(dir_okay=False), help="CSV for the transported field.")
@click.option("--nodes/--no-nodes", default=True, help="Include per-node records.")
@click.option("--out", type=click.Path(dir_okay=False))
def legendre(model: str, field_csv: str, periodic: str | None, field_out: str | None, nodes: bool,
             out: str | None) -> None:
    """Transport a Lagrangian CSV field through the Legendre map and compare residuals."""
    desc = _model(model)
    if desc.lagrangian is None:
        raise click.UsageError(f"model {desc.name} has no Lagrangian")
    field = _read_field(field_csv, periodic, desc)
    leg = LegendreMap(desc.lagrangian)
    try:
        psi, rep = solution_transport(leg, field, desc.hamiltonian)
    except SingularHessian as exc:
        _emit({"model": desc.name, "error": "SingularHessian", "message": str(exc),
               "condition": exc.condition}, out)
        sys.exit(1)
    if field_out:
        field_to_csv(psi, field_out)
    _emit({"model": desc.name, **rep.to_dict(include_nodes=nodes)}, out)


@main.command()
@click.argument("model")
@click.option("--h-list", default="1/16,1/32,1/64", show_default=True)
@click.option("--mode", type=click.Choice(["residual", "march", "transport"]), default="residual",
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def convergence(model: str, h_list: str, mode: str, out: str | None) -> None:
    """Fit the decay order of residuals (or marching errors) under refinement."""
    desc = _model(model)
    hs = _parse_spacings(h_list)
    lag = desc.lagrangian
    if lag is None or desc.evolution is None:
        raise click.UsageError(f"model {desc.name} has no manufactured solution family")
    if mode == "march":
        def family(h):
            init = manufactured_slice(lag, desc.evolution, h)
            if init.exact is None:
                raise click.UsageError(f"model {desc.name} has no exact solution to compare with")
            fld = march_evolutionary(lag, desc.evolution, init.q0, init.y0, (h / 2, h), int(round(2 / h)))
            return np.array([march_error(fld, init.exact)])
        rep = convergence_study(lambda e: e, family, hs)
    else:
        if desc.evolution != "wave" or lag.alg.base_dim != 1:
            raise click.UsageError("residual/transport studies use the scalar wave solution (model 'wave')")
        if mode == "residual":
            rep = convergence_study(lambda f: euler_lagrange_residuals(lag, f), wave_field, hs)
        else:
            leg = LegendreMap(lag)
            ham = induced_hamiltonian(leg)
            rep = convergence_study(lambda f: hamilton_residuals(ham, legendre_field(leg, f)), wave_field, hs)
    _emit({"model": desc.name, "mode": mode, **rep.to_dict()}, out)


if __name__ == "__main__":
    main()
