"""Command line front end: central configuration solves, single cabled-orbit
refinement with certification, and pair-radius sweeps.

Exit codes: ``central`` returns 0 for a certified non-degenerate
configuration, 2 when the solve diverges and 3 when the configuration is
degenerate and ``--allow-degenerate`` was not given.  ``cable`` returns 0 only
when the gradient, equation-of-motion, periodicity and winding checks all
pass, 1 when certification fails and 2 on solver divergence.
"""

from __future__ import annotations

import csv
import json
import math
import pathlib
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import click
import numpy as np

from . import figures
from .central import (
    Configuration,
    lagrange_polygon,
    maxwell_configuration,
    nondegeneracy_report,
    solve_central_configuration,
)
from .model import (
    CablingSetup,
    CaseC1,
    CaseC2,
    CaseC3,
    ConfigurationError,
    ConvergenceError,
    MassSystem,
    ParameterError,
)
from .solver import (
    RefineOptions,
    build_ansatz,
    embed_perpendicular,
    ode_residual,
    reconstruct_trajectory,
    refine,
)
from .braid import braid_word
from .loops import sobolev_norm

__all__ = ["main"]


def _family_configuration(family: str, n_ring: int, mu: float, alpha: float):
    if family == "lagrange":
        return lagrange_polygon(n_ring, alpha)
    if family == "maxwell":
        return maxwell_configuration(n_ring + 1, mu, alpha)
    raise ParameterError(f"unknown family {family!r}")


def _ring_permutation(n: int):
    """Cyclic rotation of the ring slots 1..n-1, slot 0 (the cabled one) fixed."""
    return tuple([0] + [k % (n - 1) + 1 for k in range(1, n)])


def _write(path: pathlib.Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


@click.group()
def main():
    """Construct and certify cabled periodic orbits of the N-body problem."""


# ---------------------------------------------------------------------------
# central


@main.command()
@click.option("--family", type=click.Choice(["lagrange", "maxwell"]), default="lagrange")
@click.option("--n-ring", type=int, default=3, help="bodies on the ring")
@click.option("--mu", type=float, default=1.0, help="central mass (maxwell only)")
@click.option("--alpha", type=float, default=2.0)
@click.option("--guess", type=click.Path(exists=True), default=None,
              help="JSON configuration used as the starting guess")
@click.option("--out", "outdir", type=click.Path(), default="central-out")
@click.option("--tol", type=float, default=1e-12)
@click.option("--hex-floats", is_flag=True, help="bit-exact float serialization")
@click.option("--allow-degenerate", is_flag=True)
def central(family, n_ring, mu, alpha, guess, outdir, tol, hex_floats, allow_degenerate):
    """Solve for a central configuration and report its spectrum."""
    out = pathlib.Path(outdir)
    if guess is not None:
        start = Configuration.from_json(pathlib.Path(guess).read_text())
    else:
        start = _family_configuration(family, n_ring, mu, alpha)
    try:
        cfg = solve_central_configuration(start, tol=tol)
    except ConvergenceError as exc:
        click.echo(f"central solve diverged: {exc}", err=True)
        sys.exit(2)
    report = nondegeneracy_report(cfg)
    _write(out / "configuration.json", cfg.to_json(hex_floats=hex_floats))
    _write(out / "spectrum.json", report.to_json())
    click.echo(
        f"residual ok, kernel {report.kernel_dim} (expected "
        f"{report.expected_kernel_dim}), nondegenerate={report.nondegenerate}"
    )
    if not report.nondegenerate and not allow_degenerate:
        sys.exit(3)
    sys.exit(0)


# ---------------------------------------------------------------------------
# cable


def _load_job(job):
    if job is None:
        return {}
    with open(job, "rb") as fh:
        return tomllib.load(fh)


def _build_problem(opts):
    """MassSystem / CablingSetup / starting configuration from merged options."""
    alpha = opts["alpha"]
    family = opts["family"]
    n_ring = opts["n_ring"]
    mu = opts.get("mu", 1.0)
    cfg = _family_configuration(family, n_ring, mu, alpha)
    cfg = solve_central_configuration(cfg)
    if abs(cfg.masses[0] - 1.0) > 1e-12:
        raise ConfigurationError(
            "the cabled slot must carry unit mass (maxwell needs mu = 1)"
        )
    split = opts.get("pair_split", 0.5)
    if not 0.0 < split < 1.0:
        raise ParameterError("pair mass split must lie in (0, 1)")
    m = (split, 1.0 - split) + tuple(cfg.masses[1:])
    ms = MassSystem(alpha=alpha, m=m)

    case_name = opts.get("case", "c1").lower()
    d = opts.get("d", 1)
    if case_name == "c1":
        case = CaseC1()
    elif case_name == "c2":
        m_order = opts.get("sym_order") or (cfg.n - 1 if family == "maxwell" else cfg.n)
        perm = opts.get("sym_perm")
        if perm is None:
            if family != "maxwell":
                raise ConfigurationError(
                    "the time-shift case needs an explicit body permutation "
                    "for non-ring families"
                )
            sigma = _ring_permutation(cfg.n)
        else:
            sigma = tuple(int(v) for v in str(perm).split(","))
        case = CaseC2(m=m_order, sigma=sigma)
    elif case_name == "c3":
        d = max(d, 2)
        case = CaseC3(d=d)
        cfg = embed_perpendicular(cfg, d)
    else:
        raise ParameterError(f"unknown symmetry case {case_name!r}")

    setup = CablingSetup.from_pq(
        opts["p"], opts["q"], alpha, sign=opts.get("sign", 1), case=case, d=d
    )
    return ms, setup, cfg


def _refine_and_certify(ms, setup, cfg, opts):
    L = opts.get("L", 64)
    x0, params = build_ansatz(cfg, ms, setup, L=L)
    ropts = RefineOptions(
        L=L,
        gtol=opts.get("gtol", 1e-9),
        max_iters=opts.get("max_iters", 40),
    )
    sol = refine(x0, params, ropts)
    return sol, params


def _trajectory_csv(path, loop, ms, setup, samples, hex_floats=False):
    T = setup.period
    t = T * np.arange(samples) / samples
    pos, vel = reconstruct_trajectory(loop, ms, setup, t)
    enc = (lambda v: float(v).hex()) if hex_floats else (lambda v: repr(float(v)))
    D = pos.shape[2]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["t"]
        for k in range(pos.shape[1]):
            header += [f"q{k}_{c}" for c in range(D)]
        for k in range(pos.shape[1]):
            header += [f"v{k}_{c}" for c in range(D)]
        w.writerow(header)
        for i in range(samples):
            row = [enc(t[i])]
            row += [enc(v) for v in pos[i].ravel()]
            row += [enc(v) for v in vel[i].ravel()]
            w.writerow(row)
    return pos


_CABLE_OPTIONS = [
    click.option("--family", type=click.Choice(["lagrange", "maxwell"]), default=None),
    click.option("--n-ring", type=int, default=None),
    click.option("--mu", type=float, default=None),
    click.option("--alpha", type=float, default=None),
    click.option("-p", "--pair-turns", "p", type=int, default=None),
    click.option("-q", "--frame-turns", "q", type=int, default=None),
    click.option("--sign", type=int, default=None),
    click.option("--case", type=click.Choice(["c1", "c2", "c3"]), default=None),
    click.option("--sym-order", type=int, default=None),
    click.option("--sym-perm", type=str, default=None),
    click.option("--d", type=int, default=None),
    click.option("--pair-split", type=float, default=None),
    click.option("--big-l", "--modes", "L", type=int, default=None,
                 help="Fourier truncation"),
    click.option("--gtol", type=float, default=None),
    click.option("--residual-tol", type=float, default=None),
    click.option("--periodicity-tol", type=float, default=None),
    click.option("--samples", type=int, default=None, help="CSV sample rows"),
    click.option("--hex-floats", is_flag=True, default=False),
]


def _with_options(f):
    for opt in reversed(_CABLE_OPTIONS):
        f = opt(f)
    return f


_DEFAULTS = {
    "family": "lagrange",
    "n_ring": 3,
    "mu": 1.0,
    "alpha": 1.0,
    "p": 25,
    "q": 1,
    "sign": 1,
    "case": "c1",
    "d": 1,
    "pair_split": 0.5,
    "L": 64,
    "gtol": 1e-9,
    "residual_tol": 1e-6,
    "periodicity_tol": 1e-9,
    "samples": 2048,
}


def _merge(job_doc, cli_kwargs):
    opts = dict(_DEFAULTS)
    opts.update({k: v for k, v in job_doc.items()})
    opts.update({k: v for k, v in cli_kwargs.items() if v is not None and v is not False})
    return opts


@main.command()
@click.option("--job", type=click.Path(exists=True), default=None,
              help="TOML job description; explicit flags override it")
@click.option("--out", "outdir", type=click.Path(), default="cable-out")
@_with_options
def cable(job, outdir, hex_floats, **kwargs):
    """Refine one cabled orbit and write the full certification report."""
    out = pathlib.Path(outdir)
    opts = _merge(_load_job(job), kwargs)
    try:
        ms, setup, cfg = _build_problem(opts)
        sol, params = _refine_and_certify(ms, setup, cfg, opts)
        ode = ode_residual(sol.loop, ms, setup)
        topo = braid_word(sol.loop, ms, setup)
    except (ConvergenceError,) as exc:
        click.echo(f"refinement diverged: {exc}", err=True)
        sys.exit(2)

    out.mkdir(parents=True, exist_ok=True)
    _write(out / "solution.json", sol.to_json())
    _write(out / "certification.json", json.dumps(
        {
            "ode": json.loads(ode.to_json()),
            "braid": json.loads(topo.to_json()),
        }, indent=2, sort_keys=True))
    pos = _trajectory_csv(out / "trajectory.csv", sol.loop, ms, setup,
                          opts["samples"], hex_floats=hex_floats)
    figures.plot_trajectories(pos, str(out / "trajectory.png"),
                              title=f"p={opts['p']} q={opts['q']} alpha={opts['alpha']}")
    figures.plot_mode_decay(np.abs(sol.loop.coeffs), sol.loop.L,
                            str(out / "modes.png"))

    p_, q_ = setup.pq
    want = setup.sign * p_
    # only the far bodies must track the slow frame; the two pair bodies may
    # sit at the mass center (e.g. a cabled ring center) and wind with omega
    centers_ok = all(c in (None, q_) for c in topo.center_windings[2:])
    checks = {
        "gradient": sol.grad_norm < opts["gtol"],
        "ode_residual": ode.spectral_residual < opts["residual_tol"]
        and ode.rk_mismatch < opts["residual_tol"],
        "periodicity": ode.periodicity_error < opts["periodicity_tol"],
        "windings": topo.pair_winding == want and centers_ok,
    }
    for name, ok in checks.items():
        click.echo(f"{name}: {'pass' if ok else 'FAIL'}")
    click.echo(
        f"grad={sol.grad_norm:.3e} ode={ode.spectral_residual:.3e} "
        f"rk={ode.rk_mismatch:.3e} per={ode.periodicity_error:.3e} "
        f"windings=({topo.pair_winding},{topo.center_windings}) "
        f"exponent_sum={topo.exponent_sum}"
    )
    sys.exit(0 if all(checks.values()) else 1)


# ---------------------------------------------------------------------------
# sweep


@main.command()
@click.option("--job", type=click.Path(exists=True), default=None,
              help="TOML job description with a p_values list")
@click.option("--out", "outdir", type=click.Path(), default="sweep-out")
@click.option("--p-values", type=str, default=None, help="comma separated")
@_with_options
def sweep(job, outdir, p_values, hex_floats, **kwargs):
    """Refine a family of orbits over shrinking pair radii and tabulate the
    distance to the unperturbed ansatz."""
    out = pathlib.Path(outdir)
    opts = _merge(_load_job(job), kwargs)
    if p_values is not None:
        ps = [int(v) for v in p_values.split(",")]
    else:
        ps = [int(v) for v in opts.get("p_values", [16, 25, 36])]
    rows = []
    for p_ in ps:
        o = dict(opts)
        o["p"] = p_
        try:
            ms, setup, cfg = _build_problem(o)
            sol, params = _refine_and_certify(ms, setup, cfg, o)
        except ConvergenceError as exc:
            click.echo(f"p={p_} diverged: {exc}", err=True)
            sys.exit(2)
        rows.append(
            {
                "p": p_,
                "q": o["q"],
                "epsilon": setup.epsilon,
                "grad_norm": sol.grad_norm,
                "iterations": sol.iterations,
                "h1_distance": sol.ansatz_distance,
                "distance_over_eps": sol.ansatz_distance / setup.epsilon,
            }
        )
        click.echo(
            f"p={p_}: eps={setup.epsilon:.4e} dist={sol.ansatz_distance:.4e} "
            f"dist/eps={rows[-1]['distance_over_eps']:.4f}"
        )
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        for r in rows:
            w.writerow(r)
    figures.plot_sweep(
        [r["epsilon"] for r in rows],
        [r["h1_distance"] for r in rows],
        str(out / "sweep.png"),
    )
    sys.exit(0)


if __name__ == "__main__":
    main()
