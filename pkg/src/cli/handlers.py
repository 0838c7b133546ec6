"""
Subcommand handlers
One async handler per subcommand; CPU-bound work runs on the default
executor and every output echoes the run configuration.
"""
import argparse
import asyncio
import json
import logging
import sys
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from src.core.error_handler import ErrorHandler, InconsistencyError, InvalidArgumentError, handle_errors
from src.core.experiments import (
    bagchi_compare,
    joint_moment_test,
    model_support_probability,
    moment_growth_test,
    natural_density_bound,
    petersson_check,
    sato_tate_test,
    smoothing_decay_family,
    smoothing_decay_model,
    universality_count,
)
from src.core.grid import Ensemble, EvalGrid
from src.core.lfun import calibrate_epsilon_convention, default_smoothing, family_ensemble, family_on_grid, reflection_check
from src.core.randmodel import EnsembleGenerator, sample_on_grid, second_moment_stat
from src.core.statistics import ks_two_sample_quantile
from src.core.support import greedy_support_approx
from src.models.hecke import EPSILON_CONVENTION, MIXING_SEED, FamilySnapshot, compute_family, harmonic_horizon
from src.models.targets import TargetFunction
from src.storage.family_cache import FamilyCache, export_family, import_family
from src.storage.report_writer import ReportWriter, dumps, read_ensemble
from src.utils.config import RunConfig
from src.utils.helpers import parse_pairs

logger = logging.getLogger(__name__)


class Handlers:
    """Runs the subcommands of one CLI invocation"""

    def __init__(self, config: RunConfig, settings: Dict, error_handler: ErrorHandler, stdout=None):
        self.config = config
        self.settings = settings
        self.error_handler = error_handler
        self.stdout = stdout or sys.stdout
        self.grid = EvalGrid.from_spec(config.grid)
        self.writer = ReportWriter(config.out, config.model_dump())
        self._family_cache: Optional[FamilyCache] = None
        self.routes: Dict[str, Callable] = {
            "model sample": self.model_sample,
            "model ensemble": self.model_ensemble,
            "family compute": self.family_compute,
            "family import": self.family_import,
            "family export": self.family_export,
            "compare": self.compare,
            "universality": self.universality,
            "support-approx": self.support_approx,
            "check sato-tate": self.check_sato_tate,
            "check moments": self.check_moments,
            "check petersson": self.check_petersson,
            "check smoothing": self.check_smoothing,
            "check growth": self.check_growth,
            "check second-moment": self.check_second_moment,
            "check support-probability": self.check_support_probability,
            "check reflection": self.check_reflection,
        }
        logger.debug(f"📱 Handlers initialized for '{config.command}'")

    async def dispatch(self, args: argparse.Namespace) -> int:
        route = self.routes.get(self.config.command)
        if route is None:
            raise InvalidArgumentError(f"unknown command {self.config.command!r}")
        return await handle_errors(self.error_handler)(route)(args)

    # --- shared plumbing ----------------------------------------------------

    def _section(self, name: str) -> Dict[str, Any]:
        return dict(self.settings.get(name, {}))

    @property
    def cache(self) -> Optional[FamilyCache]:
        if self._family_cache is None and self.config.cache_dir:
            self._family_cache = FamilyCache(Path(self.config.cache_dir))
        return self._family_cache

    async def _offload(self, func: Callable, *args, **kwargs):
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(None, partial(func, *args, **kwargs))

    async def _family(self, q: int, nmax: Optional[int] = None) -> FamilySnapshot:
        """Cached family when available, otherwise computed and cached"""
        nmax = max(nmax or 0, self.config.nmax or int(self._section("family").get("nmax", 1 << 17)))
        if self.cache is not None:
            snapshot = await self.cache.load(q, nmax)
            if snapshot is not None:
                logger.info(f"🗄️ cache hit for level {q}")
                return snapshot
        family = self._section("family")
        factor = float(family.get("harmonic_horizon_factor", 30.0))
        seed = int(family.get("mixing_seed", MIXING_SEED))
        snapshot = await self._offload(compute_family, q, nmax, harmonic_horizon(q, factor), seed)
        if self.cache is not None:
            await self.cache.store(snapshot)
        return snapshot

    async def _finish(self, kind: str, report: Dict, rows=None) -> int:
        await self.writer.write_report(kind, report, rows)
        print(dumps({"kind": kind, "report": report}) if self.config.out is None else f"{kind}: wrote {self.config.out}", file=self.stdout)
        return 0

    def _target(self, spec: str) -> TargetFunction:
        return TargetFunction.from_spec(spec, self.grid)

    # --- model ----------------------------------------------------------------

    def _model_N(self) -> int:
        nmax = self.config.nmax or int(self._section("model").get("nmax", 1 << 15))
        if nmax < 2:
            raise InvalidArgumentError(f"nmax must be >= 2, got {nmax}")
        return nmax // 2

    async def model_sample(self, args) -> int:
        N = self._model_N()
        sample = await self._offload(sample_on_grid, self.config.seed, self.grid, N)
        ensemble = Ensemble(grid=self.grid, values=sample.values[None, :], meta=sample.meta)
        if self.config.out:
            await self.writer.write_ensemble(ensemble)
        print(json.dumps({"seed": self.config.seed, "N": N, "center_value": [sample.values[-1].real, sample.values[-1].imag]}), file=self.stdout)
        return 0

    async def _model_ensemble(self, N: int, M: Optional[int] = None) -> Ensemble:
        model = self._section("model")
        M = M or self.config.M or int(model.get("samples", 500))
        generator = EnsembleGenerator(threads=self.config.threads, batch_size=int(model.get("batch_size", 64)))
        return await generator.generate(self.config.seed, self.grid, N, M)

    async def model_ensemble(self, args) -> int:
        ensemble = await self._model_ensemble(self._model_N())
        if self.config.out:
            await self.writer.write_ensemble(ensemble)
        print(json.dumps({"seed": self.config.seed, "M": ensemble.size, "grid_hash": self.grid.hash}), file=self.stdout)
        return 0

    # --- family ---------------------------------------------------------------

    @staticmethod
    def _family_summary(snapshot: FamilySnapshot) -> Dict:
        return {
            "q": snapshot.level,
            "g": snapshot.genus,
            "nmax": snapshot.nmax,
            "provenance": snapshot.provenance,
            "fricke_signs": snapshot.fricke_signs,
            "weights": snapshot.weights.tolist(),
            "a_2": [f.a(2) for f in snapshot.forms],
        }

    async def family_compute(self, args) -> int:
        snapshot = await self._family(args.level)
        return await self._finish("family", self._family_summary(snapshot))

    async def family_import(self, args) -> int:
        snapshot = await import_family(Path(args.path))
        if self.cache is not None:
            await self.cache.store(snapshot)
        return await self._finish("family", self._family_summary(snapshot))

    async def family_export(self, args) -> int:
        snapshot = await self._family(args.level)
        await export_family(snapshot, Path(args.path))
        return await self._finish("family", self._family_summary(snapshot))

    # --- comparison and universality -----------------------------------------

    async def compare(self, args) -> int:
        if args.family:
            family = await read_ensemble(Path(args.family))
            N = self.config.N or int(family.meta.get("N", 1 << 14))
        elif args.level:
            N = self.config.N or default_smoothing(args.level)
            snapshot = await self._family(args.level, 2 * N)
            family = await self._offload(family_ensemble, snapshot, self.grid, N)
        else:
            raise InvalidArgumentError("compare needs --level or --family")
        model = await read_ensemble(Path(args.model)) if args.model else await self._model_ensemble(N)
        report = await self._offload(bagchi_compare, family, model, self.grid)
        payload = report.to_dict()
        payload["ks_quantile_99"] = ks_two_sample_quantile(report.family_effective_size, report.model_size, 0.99)
        return await self._finish("compare", payload, report.to_rows())

    async def universality(self, args) -> int:
        q = args.level
        N = self.config.N or default_smoothing(q)
        target = self._target(args.target)
        target.validate_admissible(self.grid)
        snapshot = await self._family(q, 2 * N)
        evaluations = await self._offload(family_on_grid, snapshot, self.grid, N)
        rows = []
        for eps in self.config.eps:
            count = universality_count(evaluations, target, eps)
            bound = natural_density_bound(snapshot, count.distances < eps, args.eta)
            rows.append(
                {
                    "eps": eps,
                    "count": count.count,
                    "genus": count.genus,
                    "harmonic_fraction": count.harmonic_fraction,
                    "natural_fraction": count.natural_fraction,
                    "natural_lower_bound": bound.lower_bound,
                }
            )
        report = {"q": q, "N": N, "target": target.to_dict(), "eta": args.eta, "counts": rows}
        return await self._finish("universality", report, rows)

    async def support_approx(self, args) -> int:
        defaults = self._section("support")
        pmax = args.pmax or int(defaults.get("pmax", 1000))
        n0 = args.n0 if args.n0 is not None else int(defaults.get("n0", 10))
        sweeps = args.sweeps if args.sweeps is not None else int(defaults.get("sweeps", 0))
        trace = await self._offload(greedy_support_approx, self._target(args.target), self.grid, pmax, n0, sweeps)
        free = [int(p) for p in trace.primes if p > n0]
        steps = [{"step": i, "p": free[i % len(free)], "residual": r} for i, r in enumerate(trace.residuals)]
        return await self._finish("support-approx", trace.to_dict(), steps)

    # --- checks ---------------------------------------------------------------

    async def check_sato_tate(self, args) -> int:
        snapshot = await self._family(args.level, args.prime)
        statistic = sato_tate_test(snapshot, args.prime, args.weighting)
        report = {"q": args.level, "p": args.prime, "weighting": args.weighting, "ks": statistic}
        return await self._finish("sato-tate", report)

    async def check_moments(self, args) -> int:
        snapshot = await self._family(args.level, max(args.primes))
        result = joint_moment_test(snapshot, args.primes, args.exponents, args.weighting)
        report = {
            "q": args.level,
            "primes": result.primes,
            "exponents": result.exponents,
            "family": result.family,
            "model": result.model,
            "gap": result.gap,
        }
        return await self._finish("moments", report)

    async def check_petersson(self, args) -> int:
        defaults = self._section("petersson")
        pairs = parse_pairs(args.pairs or defaults.get("pairs", "2:2,2:3,3:5"))
        c_factor = args.c_factor or int(defaults.get("c_factor", 10000))
        snapshot = await self._family(args.level, max(max(p) for p in pairs))
        report = await self._offload(petersson_check, snapshot, pairs, c_factor)
        return await self._finish("petersson", report.to_dict(), report.rows)

    async def check_smoothing(self, args) -> int:
        if args.source == "family":
            if not args.level:
                raise InvalidArgumentError("family smoothing needs --level")
            snapshot = await self._family(args.level, 8 * max(args.N_list))
            table = await self._offload(smoothing_decay_family, snapshot, self.grid, args.N_list)
        else:
            table = await self._offload(smoothing_decay_model, self.grid, args.N_list, args.samples, self.config.seed)
        report = {"source": table.source, "N_ref": table.N_ref, "gaps": table.gaps, "slope": table.slope}
        return await self._finish("smoothing", report, table.to_rows())

    async def check_growth(self, args) -> int:
        snapshot = None
        if args.level:
            N = args.N or default_smoothing(args.level)
            snapshot = await self._family(args.level, 2 * N)
        table = await self._offload(moment_growth_test, snapshot, args.sigma, args.t_list, args.N, args.samples, self.config.seed)
        report = {
            "sigma": table.sigma,
            "q": args.level,
            "family_exponent": table.family_exponent,
            "model_exponent": table.model_exponent,
        }
        return await self._finish("growth", report, table.to_rows())

    async def check_second_moment(self, args) -> int:
        estimates = await self._offload(second_moment_stat, args.sigma, args.u_list, args.samples, self.config.seed)
        rows = [{"u": e.u, "mean": e.mean, "stderr": e.stderr, "expected": e.expected} for e in estimates]
        return await self._finish("second-moment", {"sigma": args.sigma, "estimates": rows}, rows)

    async def check_support_probability(self, args) -> int:
        target = self._target(args.target)
        results = await model_support_probability(
            target, self.grid, self.config.eps, args.samples, self.config.seed, args.N, self.config.threads
        )
        rows = [r.to_dict() for r in results]
        return await self._finish("support-probability", {"target": target.to_dict(), "results": rows}, rows)

    async def check_reflection(self, args) -> int:
        defaults = self._section("reflection")
        s = args.s or float(defaults.get("s", 1.2))
        N = args.N or int(defaults.get("N", 1 << 16))
        snapshot = await self._family(args.level, 2 * N)
        rows = []
        for form in snapshot.forms:
            rows.append(
                {
                    "form_id": form.id,
                    "fricke_sign": form.fricke_sign,
                    "root_number": form.root_number,
                    "residual_plus": await self._offload(reflection_check, form, s, N, 1),
                    "residual_minus": await self._offload(reflection_check, form, s, N, -1),
                }
            )
        convention = await self._offload(calibrate_epsilon_convention, snapshot.forms[0], s, N)
        if convention != EPSILON_CONVENTION:
            raise InconsistencyError(f"calibrated convention {convention:+d} differs from the frozen {EPSILON_CONVENTION:+d}")
        report = {"q": args.level, "s": s, "N": N, "convention": convention, "forms": rows}
        return await self._finish("reflection", report, rows)
