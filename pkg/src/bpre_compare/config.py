"""Plain-text run configuration.

One ``[bpre]`` section of flat ``key = value`` lines (INI syntax)::

    [bpre]
    format_version = 1
    family1_kind = TwoPoint
    family1_a = 0.0
    family1_b = 1.0
    family2_kind = TwoPoint
    family2_a = 0.0
    family2_b = 1.0
    latent_r = 0.5
    n = 2000
    m = 2000
    pop_cap = 1000000000          # or "none" for exact mode
    master_seed = 0
    replications = 1000000
    kappa = 0.05
    delta_prime = 0.5
    x_grid = 0.0, 0.1, ..., 2.0
    ladder = 250, 1000, 4000
    ladder_replications = 200000
    coverage_replications = 10000
    quad_order = 64
    suite = all                   # clt | berry-esseen | tails | coverage | all
    source = simulate             # simulate | normal
    output =                      # CSV path ("" = command default)
    summary =                     # JSON path ("" = command default)

Every key is optional; unknown keys and unparsable values raise
:class:`~bpre_compare.exceptions.ConfigError` naming the key.  Floats are
written with ``repr`` so ``RunConfig.from_text(cfg.to_text()) == cfg``.
"""

import configparser
import dataclasses
import hashlib
from dataclasses import dataclass, field

from .environment import EnvironmentFamily, FamilyKind
from .exceptions import BPREError, ConfigError
from .simulation import DEFAULT_POP_CAP, SimConfig
from .verify import DEFAULT_LADDER, DEFAULT_TAIL_GRID, SUITES

FORMAT_VERSION = 1
SECTION = "bpre"
_KINDS = tuple(k.value for k in FamilyKind)


def _default_sim():
    f = EnvironmentFamily.two_point(0.0, 1.0)
    return SimConfig(f, f)


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig = field(default_factory=_default_sim)
    kappa: float = 0.05
    delta_prime: float = 0.5
    x_grid: tuple = DEFAULT_TAIL_GRID
    ladder: tuple = DEFAULT_LADDER
    ladder_replications: int = 200000
    coverage_replications: int = 10000
    quad_order: int = 64
    suite: str = "all"
    source: str = "simulate"
    output: str = ""
    summary: str = ""
    format_version: int = FORMAT_VERSION

    def to_text(self):
        s = self.sim
        lines = [f"[{SECTION}]", f"format_version = {self.format_version}"]
        for i, fam in ((1, s.family1), (2, s.family2)):
            lines += [f"family{i}_kind = {fam.kind.value}",
                      f"family{i}_a = {fam.a!r}",
                      f"family{i}_b = {fam.b!r}"]
        lines += [
            f"latent_r = {float(s.latent_r)!r}",
            f"n = {int(s.n)}",
            f"m = {int(s.m)}",
            f"pop_cap = {'none' if s.pop_cap is None else int(s.pop_cap)}",
            f"master_seed = {int(s.master_seed)}",
            f"replications = {int(s.replications)}",
            f"kappa = {float(self.kappa)!r}",
            f"delta_prime = {float(self.delta_prime)!r}",
            f"x_grid = {', '.join(repr(float(x)) for x in self.x_grid)}",
            f"ladder = {', '.join(str(int(x)) for x in self.ladder)}",
            f"ladder_replications = {int(self.ladder_replications)}",
            f"coverage_replications = {int(self.coverage_replications)}",
            f"quad_order = {int(self.quad_order)}",
            f"suite = {self.suite}",
            f"source = {self.source}",
            f"output = {self.output}",
            f"summary = {self.summary}",
        ]
        return "\n".join(lines) + "\n"

    def digest(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), source=str(path))

    @classmethod
    def from_text(cls, text, source="<string>"):
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                           interpolation=None)
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        if not parser.has_section(SECTION):
            raise ConfigError(f"{source}: missing [{SECTION}] section")
        extra = [s for s in parser.sections() if s != SECTION]
        if extra:
            raise ConfigError(f"{source}: unexpected section(s) {extra}")
        raw = dict(parser.items(SECTION))
        unknown = sorted(set(raw) - _KEYS)
        if unknown:
            raise ConfigError(f"{source}: unknown key {unknown[0]!r}")
        return _build(raw, source)


def _parse(raw, key, conv, default, source):
    if key not in raw:
        return default
    text = raw[key].strip()
    try:
        return conv(text)
    except (ValueError, TypeError, BPREError) as exc:
        raise ConfigError(f"{source}: bad value for key {key!r}: {text!r} ({exc})") from None


def _cap(text):
    return None if text.lower() in ("none", "exact") else int(text)


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _choice(options):
    def conv(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return conv


def _build(raw, source):
    base = RunConfig()
    version = _parse(raw, "format_version", int, FORMAT_VERSION, source)
    if version != FORMAT_VERSION:
        raise ConfigError(f"{source}: bad value for key 'format_version': "
                          f"{version} (this reader understands {FORMAT_VERSION})")
    fams = []
    for i, default in ((1, base.sim.family1), (2, base.sim.family2)):
        kind = _parse(raw, f"family{i}_kind", _choice(_KINDS), default.kind.value, source)
        a = _parse(raw, f"family{i}_a", float, default.a, source)
        b = _parse(raw, f"family{i}_b", float, default.b, source)
        try:
            fams.append(EnvironmentFamily(kind, a, b))
        except BPREError as exc:
            key = f"family{i}_b" if b <= 0 or b != b else f"family{i}_a"
            raise ConfigError(f"{source}: bad value for key {key!r}: {exc}") from None
    sim_kw = dict(
        latent_r=_parse(raw, "latent_r", float, 0.0, source),
        n=_parse(raw, "n", int, base.sim.n, source),
        m=_parse(raw, "m", int, base.sim.m, source),
        pop_cap=_parse(raw, "pop_cap", _cap, DEFAULT_POP_CAP, source),
        master_seed=_parse(raw, "master_seed", int, 0, source),
        replications=_parse(raw, "replications", int, base.sim.replications, source),
    )
    try:
        sim = SimConfig(fams[0], fams[1], **sim_kw)
    except BPREError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    kappa = _parse(raw, "kappa", float, base.kappa, source)
    if not 0.0 < kappa < 1.0:
        raise ConfigError(f"{source}: bad value for key 'kappa': {kappa!r} (must lie in (0, 1))")
    delta_prime = _parse(raw, "delta_prime", float, base.delta_prime, source)
    if not 0.0 < delta_prime < 1.0:
        raise ConfigError(f"{source}: bad value for key 'delta_prime': {delta_prime!r} "
                          "(must lie in (0, 1))")
    return RunConfig(
        sim=sim,
        kappa=kappa,
        delta_prime=delta_prime,
        x_grid=_parse(raw, "x_grid", _floats, base.x_grid, source),
        ladder=_parse(raw, "ladder", _ints, base.ladder, source),
        ladder_replications=_parse(raw, "ladder_replications", int,
                                   base.ladder_replications, source),
        coverage_replications=_parse(raw, "coverage_replications", int,
                                     base.coverage_replications, source),
        quad_order=_parse(raw, "quad_order", int, base.quad_order, source),
        suite=_parse(raw, "suite", _choice(SUITES), base.suite, source),
        source=_parse(raw, "source", _choice(("simulate", "normal")), base.source, source),
        output=_parse(raw, "output", str, "", source),
        summary=_parse(raw, "summary", str, "", source),
        format_version=version,
    )


_KEYS = {
    "format_version", "latent_r", "n", "m", "pop_cap", "master_seed", "replications",
    "kappa", "delta_prime", "x_grid", "ladder", "ladder_replications",
    "coverage_replications", "quad_order", "suite", "source", "output", "summary",
} | {f"family{i}_{k}" for i in (1, 2) for k in ("kind", "a", "b")}


def with_sim(cfg, **changes):
    """Copy of ``cfg`` with fields of its SimConfig replaced."""
    return dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, **changes))
