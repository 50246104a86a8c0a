"""Command line front end: ``qlatt run`` and ``qlatt describe``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bounds, gibbs, ldp
from .certificates import H1, H3, best_certificate, certificate
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .lattice import Region, norms
from .models import make_model, observable, observable_operator
from .operators import commutator_norm, local_operator

log = logging.getLogger("qlatt")

EXIT_OK, EXIT_CONFIG, EXIT_CERTIFICATE, EXIT_VERIFY = 0, 2, 3, 4
KMS_PAIRS = 50


def _fmt(x) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    raise TypeError(type(o))


def _dump(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


# ---------------------------------------------------------------------------
# tasks


class Runner:
    def __init__(self, cfg: RunConfig, seed: int = 0, force: bool = False):
        self.cfg = cfg
        self.seed = seed
        self.force = force
        self.model = make_model(cfg.model, **cfg.params)
        self.out = Path(cfg.out)
        self.files: list[Path] = []
        self.curve: ldp.MGFCurve | None = None
        self.notes: list[str] = []

    def state(self, L):
        return gibbs.model_state(self.model, L, self.cfg.beta, self.cfg.mu, self.cfg.convention)

    def certify(self):
        cfg = self.cfg
        phi = self.model.effective(cfg.beta, cfg.mu or 0.0)
        try:
            psi = observable(self.model, cfg.observable)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return best_certificate(phi, psi, cfg.lam)

    def mgf(self, pool) -> None:
        cfg = self.cfg
        self.curve = ldp.mgf_curve(
            self.model,
            cfg.observable,
            cfg.volumes,
            cfg.alphas,
            cfg.beta,
            cfg.mu,
            cfg.convention,
            cfg.lam,
            executor=pool,
            enforce_window=not self.force,
        )
        if len(cfg.volumes) >= 3:
            ex = self.curve.extrapolate()
            if not ex.cauchy:
                self.notes.append("mgf: volume increments are not decreasing; extrapolation is unreliable")

    def write_mgf(self) -> None:
        c = self.curve
        rows = [
            (self.model.name, L, float(a), float(g), float(f), c.convention)
            for L in c.volumes
            for a, g, f in zip(c.alphas, c.g[L], c.f[L])
        ]
        self.files.append(_write_csv(self.out / "mgf.csv", ["model", "L", "alpha", "g", "f", "convention"], rows))

    def rate(self) -> ldp.RateFunction:
        c = self.curve
        f = c.best()
        if not ldp.is_convex(c.alphas, f):
            self.notes.append("rate: extrapolated curve is not convex; using the largest volume")
            f = c.f[c.volumes[-1]]
        probe = ldp.legendre(c.alphas, f)
        lo, hi = probe.domain
        pad = 0.1 * max(hi - lo, 1e-3)
        return ldp.legendre(c.alphas, f, x=np.linspace(lo - pad, hi + pad, 201))

    def write_rate(self, rate) -> None:
        rows = [(float(x), float(i), "window-limited" if w else "ok") for x, i, w in zip(rate.x, rate.values, rate.window_limited)]
        self.files.append(_write_csv(self.out / "rate.csv", ["x", "I", "window_flag"], rows))

    def probe(self, rate, pool) -> ldp.ProbeReport:
        cfg = self.cfg

        def one(L):
            return L, gibbs.deviation_measure(self.state(L), observable_operator(self.model, cfg.observable, L))

        measures = dict(pool.map(one, cfg.volumes))
        rep = ldp.decay_probe(measures, cfg.probe_interval, rate)
        self.files.append(_write_csv(self.out / "probe.csv", ["L", "C_lo", "C_hi", "r", "inf_I", "gap"], list(rep.rows())))
        return rep

    def verify(self) -> dict:
        cfg = self.cfg
        rng = np.random.default_rng(self.seed)
        suites = {}
        for part in (1, 2):
            reps = bounds.lemma_suite(part, cfg.verify_instances, 8, seed=self.seed + part)
            suites[f"lemma_part{part}"] = {
                "passed": all(r.passed for r in reps),
                "instances": len(reps),
                "failures": sum(not r.passed for r in reps),
                "min_margin": min(r.margin for r in reps),
            }
        L0 = cfg.volumes[0]
        st = self.state(L0)
        worst = 0.0
        for _ in range(KMS_PAIRS):
            a = bounds.random_hermitian(st.dim, rng) + 1j * bounds.random_hermitian(st.dim, rng)
            b = bounds.random_hermitian(st.dim, rng)
            res = gibbs.kms_check(st, a, b) / (np.linalg.norm(a, 2) * np.linalg.norm(b, 2))
            worst = max(worst, res)
        suites["kms"] = {"passed": worst < 1e-8, "L": L0, "pairs": KMS_PAIRS, "max_relative_residual": worst}
        var = []
        for L in cfg.volumes:
            s = gibbs.model_state(self.model, L, cfg.beta, cfg.mu, gibbs.NORMALIZED)
            ent, en = gibbs.mean_entropy_energy(s)
            var.append(abs(s.pressure - (ent - en)))
        suites["variational"] = {"passed": max(var) < 1e-10, "max_residual": max(var)}
        if self.curve is None:
            self.mgf(None)
        c = self.curve
        lip = ldp.lipschitz_constant(self.model, cfg.observable)
        zero = np.flatnonzero(c.alphas == 0.0)
        structure = {
            "f_zero": all(c.f[L][zero[0]] == 0.0 for L in c.volumes) if len(zero) else None,
            "convex": all(ldp.is_convex(c.alphas, c.f[L]) for L in c.volumes),
            "lipschitz": all(ldp.lipschitz_ok(c.alphas, c.f[L], lip) for L in c.volumes),
        }
        structure["passed"] = all(v is not False for v in structure.values())
        suites["mgf_structure"] = structure
        commuting = self._commuting_suite()
        if commuting is not None:
            suites["commuting_identity"] = commuting
        suites["ruelle"] = self._ruelle_suite()
        return suites

    def _commuting_suite(self):
        cfg, m = self.cfg, self.model
        if cfg.observable == "number" and m.is_fermionic and cfg.beta > 0:
            fn = ldp.translated_pressure_density
        elif cfg.observable == "energy" and cfg.beta > 0:
            fn = ldp.translated_pressure_energy
        else:
            return None
        worst = 0.0
        for L in cfg.volumes:
            for a, f in zip(self.curve.alphas, self.curve.f[L]):
                if fn is ldp.translated_pressure_energy and abs(cfg.beta - a) < 0.05:
                    continue
                worst = max(worst, abs(f - fn(cfg.beta, cfg.mu or 0.0, float(a), m, L)))
        return {"passed": worst < 1e-10, "max_residual": worst}

    def _ruelle_suite(self):
        cfg = self.cfg
        phi = self.model.effective(cfg.beta, cfg.mu or 0.0)
        if self.model.is_fermionic or not certificate(phi, phi, cfg.lam, H1).passed:
            return {"passed": True, "skipped": "no H1 certificate for a spin model"}
        L = cfg.volumes[0]
        centre = (L - 1) // 2
        a = local_operator(np.diag([1.0, -1.0]), [(centre,)])
        width = bounds.strip_half_width(phi, cfg.lam)
        ys = [y for y in (0.1, 0.25, 0.5) if y <= width]
        zs = [t + 1j * y for y in ys for t in (0.0, 0.5, 1.0)]
        rep = bounds.ruelle_bound(phi, cfg.lam, a, Region.chain(L), zs)
        return {"passed": rep.passed, "L": L, "worst_margin": rep.margin}


def tasks_need_mgf(cfg: RunConfig) -> bool:
    return bool(set(cfg.tasks) & {"mgf", "rate", "probe", "verify"})


def run(cfg: RunConfig, seed: int = 0, force: bool = False) -> int:
    runner = Runner(cfg, seed, force)
    runner.out.mkdir(parents=True, exist_ok=True)
    cert = runner.certify()
    manifest = {"schema_version": cfg.schema_version, "config": cfg.to_dict(), "seed": seed, "certificate": cert.to_dict()}
    if not cert.passed:
        if not force:
            log.error("certificate %s failed: %s", cert.hypothesis, cert.reason)
            _dump(runner.out / "manifest.json", {**manifest, "exit_status": EXIT_CERTIFICATE, "files": []})
            return EXIT_CERTIFICATE
        runner.notes.append(f"certificate {cert.hypothesis} failed ({cert.reason}); continuing under --force")
    outside = [a for a in cfg.alphas if abs(a) >= cert.alpha_window]
    if outside and tasks_need_mgf(cfg) and not force:
        log.error("alpha grid leaves the admissible window |alpha| < %g", cert.alpha_window)
        _dump(runner.out / "manifest.json", {**manifest, "exit_status": EXIT_CERTIFICATE, "files": []})
        return EXIT_CERTIFICATE
    from . import plotting

    status = EXIT_OK
    tasks = set(cfg.tasks)
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        if tasks & {"mgf", "rate", "probe"}:
            runner.mgf(pool)
        if "mgf" in tasks:
            runner.write_mgf()
            runner.files.append(plotting.plot_mgf(runner.curve, runner.out / "mgf.png"))
        rate = None
        if tasks & {"rate", "probe"}:
            rate = runner.rate()
        if "rate" in tasks:
            runner.write_rate(rate)
            runner.files.append(plotting.plot_rate(rate, runner.out / "rate.png"))
        if "probe" in tasks:
            rep = runner.probe(rate, pool)
            runner.files.append(plotting.plot_probe(rep, runner.out / "probe.png"))
        if "verify" in tasks:
            suites = runner.verify()
            runner.files.append(_dump(runner.out / "verification.json", {"seed": seed, "suites": suites}))
            if not all(s["passed"] for s in suites.values()):
                status = EXIT_VERIFY
    manifest["notes"] = runner.notes
    manifest["exit_status"] = status
    manifest["files"] = [{"path": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size} for p in runner.files]
    _dump(runner.out / "manifest.json", manifest)
    return status


# ---------------------------------------------------------------------------
# describe


def _parse_spec(tokens) -> tuple[str, int, dict]:
    if not tokens:
        raise ConfigError("describe needs a preset name")
    preset, L, params = tokens[0], 2, {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ConfigError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        if k == "L":
            L = int(v)
        else:
            params[k] = float(v)
    return preset, L, params


def describe(preset: str, L: int, params: dict, lam: float = 1.0, beta: float = 1.0, obs: str | None = None, stream=None) -> int:
    stream = stream or sys.stdout
    try:
        model = make_model(preset, **params)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    obs = obs or ("number" if model.is_fermionic else "magnetization_z")
    phi = model.effective(beta)
    psi = observable(model, obs)
    rep = norms(phi, lam)
    p = lambda *a: print(*a, file=stream)  # noqa: E731
    p(f"model          {model.name} {dict(model.params)}")
    p(f"site kind      {model.site_kind}")
    p(f"L              {L}")
    p(f"dimension      {model.dim(L)}")
    for k, v in rep.to_dict().items():
        p(f"{k:<14} {v}")
    for hyp in (H1, H3):
        c = certificate(phi, psi, lam, hyp)
        margin = "-" if c.margin is None else f"{c.margin:.6g}"
        p(f"{hyp:<14} {'pass' if c.passed else 'fail'}  margin={margin}  {c.reason}")
    best = best_certificate(phi, psi, lam)
    p(f"alpha window   |alpha| < {best.alpha_window:.6g} ({best.hypothesis}, observable {obs})")
    if model.is_fermionic:
        c = commutator_norm(model.hamiltonian(L), model.number_operator(L))
        p(f"[H, N]         {c:.3e} ({'commutes' if c < 1e-12 else 'does not commute'})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qlatt", description="Gibbs states, moment generating functions and rate functions for lattice models")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the tasks of a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--task", action="append", choices=["mgf", "rate", "verify", "probe"], help="override the config task list (repeatable)")
    r.add_argument("--threads", type=int)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--force", action="store_true", help="continue when the certificate fails")
    r.add_argument("--out")
    d = sub.add_parser("describe", help="print dimensions, norms and certificates of a model")
    d.add_argument("spec", nargs="*", help="preset name followed by key=value pairs, e.g. hubbard L=2 U=4")
    d.add_argument("--config")
    d.add_argument("--lam", type=float, default=1.0)
    d.add_argument("--beta", type=float, default=1.0)
    d.add_argument("--observable")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "describe":
            if args.config:
                cfg = load_config(args.config)
                return describe(cfg.model, cfg.volumes[-1], cfg.params, cfg.lam, cfg.beta, cfg.observable)
            preset, L, params = _parse_spec(args.spec)
            return describe(preset, L, params, args.lam, args.beta, args.observable)
        cfg = load_config(args.config)
        overrides = {}
        if args.task:
            overrides["tasks"] = args.task
        if args.threads is not None:
            overrides["threads"] = args.threads
        if args.out:
            overrides["out"] = args.out
        if overrides:
            cfg = config_from_dict({**cfg.to_dict(), **overrides})
        return run(cfg, seed=args.seed, force=args.force)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
