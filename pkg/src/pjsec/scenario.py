"""Scenario files: parse, validate and execute simulation runs.

A scenario is an INI file::

    [scenario]
    schema_version = 1
    name = demo
    seed = 42
    layout = 2,3,8            ; b,p,h
    group = secp256k1         ; optional
    out_dir = results         ; optional, overridden by --out

    [vicinity v1]
    enodeb = 1
    superpeer = 2
    founders = 2              ; members that join through the head itself
    neighbors = v2            ; overflow targets

    [cost]                    ; optional CostModelConfig overrides
    r0 = 100

    [run joins]
    kind = honest             ; honest | traffic | sybil_bandwidth | sybil | mitm | eclipse
    vicinity = v1
    joins = 500

Every run gets a freshly built topology and its own random sub-stream
derived from the scenario seed and the run's name, so runs never perturb
each other. Output files are ``<name>.<run>.csv`` (plus transcripts, token
and public-key files for honest runs) in the output directory.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import random
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from . import adversary, cost
from .errors import ProtocolError
from .group import Group, get_group
from .overlay import IdLayout, OverlayId
from .protocol import encode_message
from .session import VicinityHead, run_join

SCHEMA_VERSION = 1
RUN_KINDS = ("honest", "traffic", "sybil_bandwidth", "sybil", "mitm", "eclipse")
BASE_TIME = 1_600_000_000
BUNDLED_DIR = Path(__file__).with_name("scenarios")

HONEST_COLUMNS = ("scenario", "run", "join", "ip", "vicinity", "id_n", "probe", "forwarded",
                  "verdict", "ids_agree", "mul", "add", "hash", "inverse")


class ScenarioError(Exception):
    """Raised for unusable scenario files. ``exit_code`` follows the CLI contract."""

    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _parse_error(msg: str) -> ScenarioError:
    return ScenarioError(msg, 2)


def _ref_error(msg: str) -> ScenarioError:
    return ScenarioError(msg, 3)


@dataclass
class VicinitySpec:
    name: str
    enodeb: int
    superpeer: int
    founders: int = 1
    neighbors: list[str] = field(default_factory=list)


@dataclass
class RunSpec:
    name: str
    kind: str
    options: dict[str, str]

    def get_int(self, key: str, default: int | None = None) -> int:
        raw = self.options.get(key)
        if raw is None:
            if default is None:
                raise _parse_error(f"run {self.name!r} needs '{key}'")
            return default
        try:
            return int(raw)
        except ValueError:
            raise _parse_error(f"run {self.name!r}: '{key}' must be an integer") from None

    def get_bool(self, key: str, default: bool) -> bool:
        raw = self.options.get(key)
        if raw is None:
            return default
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise _parse_error(f"run {self.name!r}: '{key}' must be a boolean")

    def get_list(self, key: str, default: list[str]) -> list[str]:
        raw = self.options.get(key)
        if raw is None:
            return default
        return [item.strip() for item in raw.split(",") if item.strip()]


@dataclass
class Scenario:
    name: str
    seed: int
    layout: IdLayout
    group_id: str
    vicinities: dict[str, VicinitySpec]
    cost: cost.CostModelConfig
    runs: list[RunSpec]
    out_dir: str = "out"

    def substream(self, label: str) -> random.Random:
        return random.Random(f"{self.seed}/{label}")


def _int_range(text: str) -> list[int]:
    out: list[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if "-" in chunk:
            lo, hi = chunk.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif chunk:
            out.append(int(chunk))
    return out


def _cost_config(section: configparser.SectionProxy | None) -> cost.CostModelConfig:
    if section is None:
        return cost.CostModelConfig()
    kwargs: dict[str, Any] = {}
    known = {f.name: f for f in fields(cost.CostModelConfig)}
    for key, raw in section.items():
        if key not in known or key in ("timings", "jitter_range"):
            raise _parse_error(f"unknown cost option {key!r}")
        try:
            if key == "jitter":
                kwargs[key] = section.getboolean(key)
            elif key == "r":
                kwargs[key] = int(raw)
            else:
                kwargs[key] = float(raw)
        except ValueError:
            raise _parse_error(f"cost option {key!r} has a bad value {raw!r}") from None
    try:
        return cost.CostModelConfig(**kwargs)
    except ValueError as exc:
        raise _parse_error(str(exc)) from None


def parse_scenario(text: str, seed_override: int | None = None) -> Scenario:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise _parse_error(f"cannot parse scenario: {exc}") from None
    if not parser.has_section("scenario"):
        raise _parse_error("missing [scenario] section")
    head = parser["scenario"]
    if head.get("schema_version") != str(SCHEMA_VERSION):
        raise _parse_error(f"schema_version must be {SCHEMA_VERSION}")
    try:
        name = head["name"].strip()
        seed = int(head["seed"]) if seed_override is None else seed_override
        layout = IdLayout.parse(head["layout"])
    except KeyError as exc:
        raise _parse_error(f"[scenario] is missing {exc.args[0]!r}") from None
    except ValueError as exc:
        raise _parse_error(f"bad [scenario] value: {exc}") from None
    if not name or any(c in name for c in "/\\"):
        raise _parse_error("scenario name must be a plain file-name fragment")
    group_id = head.get("group", "secp256k1").strip()
    out_dir = head.get("out_dir", "out").strip() or "out"

    vicinities: dict[str, VicinitySpec] = {}
    runs: list[RunSpec] = []
    for section in parser.sections():
        if section in ("scenario", "cost"):
            continue
        kind, _, label = section.partition(" ")
        label = label.strip()
        sec = parser[section]
        if kind == "vicinity" and label:
            try:
                spec = VicinitySpec(label, int(sec["enodeb"]), int(sec["superpeer"]),
                                    int(sec.get("founders", "1")),
                                    [n.strip() for n in sec.get("neighbors", "").split(",")
                                     if n.strip()])
                OverlayId.from_fields(layout, spec.enodeb, spec.superpeer, 0)
            except (KeyError, ValueError) as exc:
                raise _parse_error(f"bad vicinity {label!r}: {exc}") from None
            if not 1 <= spec.founders < layout.slots:
                raise _parse_error(f"vicinity {label!r}: founders must be in 1..2^h-1")
            vicinities[label] = spec
        elif kind == "run" and label:
            run_kind = sec.get("kind", "").strip()
            if run_kind not in RUN_KINDS:
                raise _parse_error(f"run {label!r}: kind must be one of {RUN_KINDS}")
            runs.append(RunSpec(label, run_kind,
                                {k: v for k, v in sec.items() if k != "kind"}))
        else:
            raise _parse_error(f"unexpected section [{section}]")

    scenario = Scenario(name, seed, layout, group_id, vicinities,
                        _cost_config(parser["cost"] if parser.has_section("cost") else None),
                        runs, out_dir)
    _validate(scenario)
    return scenario


def _validate(sc: Scenario) -> None:
    try:
        get_group(sc.group_id)
    except KeyError:
        raise _ref_error(f"unknown group {sc.group_id!r}") from None
    prefixes = {}
    for v in sc.vicinities.values():
        key = (v.enodeb, v.superpeer)
        if key in prefixes:
            raise _parse_error(f"vicinities {prefixes[key]!r} and {v.name!r} share a prefix")
        prefixes[key] = v.name
        for n in v.neighbors:
            if n not in sc.vicinities:
                raise _ref_error(f"vicinity {v.name!r} names unknown neighbour {n!r}")
    for run in sc.runs:
        if run.kind in ("honest", "sybil", "mitm", "eclipse"):
            target = run.options.get("vicinity", "").strip()
            if target not in sc.vicinities:
                raise _ref_error(f"run {run.name!r} refers to unknown vicinity {target!r}")
        if run.kind == "traffic":
            for s in run.get_list("schemes", list(cost.SCHEMES)):
                if s not in cost.SCHEMES:
                    raise _ref_error(f"run {run.name!r} names unknown scheme {s!r}")
            if run.get_int("n_joins", 500) < 1:
                raise _parse_error(f"run {run.name!r}: n_joins must be >= 1")
        if run.kind == "sybil_bandwidth":
            try:
                bits = _int_range(run.options.get("domain_bits", "1-10"))
            except ValueError:
                raise _parse_error(f"run {run.name!r}: bad domain_bits") from None
            if not bits or not all(1 <= b <= 10 for b in bits):
                raise _parse_error(f"run {run.name!r}: domain_bits must lie in 1..10")
            run.get_int("group_size", 64)
        if run.kind == "mitm":
            cells = run.get_list("cells", ["all"])
            valid = {f"{h}.{f}" for h, f in adversary.tamper_cells()}
            for c in cells:
                if c != "all" and c not in valid:
                    raise _ref_error(f"run {run.name!r} names unknown tamper cell {c!r}")
            run.get_int("sessions", 1)
        if run.kind == "honest":
            run.get_int("joins")
        if run.kind == "sybil":
            if run.get_int("k") < 1 or run.get_int("ips", 1) < 1:
                raise _parse_error(f"run {run.name!r}: k and ips must be >= 1")
        if run.kind == "eclipse":
            node = run.get_int("target_node")
            if not 0 <= node < sc.layout.slots:
                raise _parse_error(f"run {run.name!r}: target_node outside the node field")
            run.get_int("tries")
            run.get_int("window", 1)


def load_scenario(path: str | Path, seed_override: int | None = None) -> Scenario:
    path = resolve_scenario_path(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}", 4) from None
    return parse_scenario(text, seed_override)


def resolve_scenario_path(path: str | Path) -> Path:
    """Existing paths win; otherwise try the bundled scenarios by name."""
    p = Path(path)
    if p.exists():
        return p
    for candidate in (BUNDLED_DIR / p.name, BUNDLED_DIR / f"{p.name}.scenario"):
        if candidate.exists():
            return candidate
    return p


def build_topology(sc: Scenario, group: Group) -> dict[str, VicinityHead]:
    heads = {}
    for v in sorted(sc.vicinities.values(), key=lambda v: v.name):
        id_v = OverlayId.from_fields(sc.layout, v.enodeb, v.superpeer, 0)
        heads[v.name] = VicinityHead.create(group, id_v, sc.substream(f"vicinity:{v.name}"),
                                            founders=v.founders, now=BASE_TIME)
    return heads


def _neighbors(sc: Scenario, heads: dict[str, VicinityHead], name: str) -> list[VicinityHead]:
    return [heads[n] for n in sc.vicinities[name].neighbors]


def _run_honest(sc: Scenario, run: RunSpec, group: Group) -> dict[str, bytes]:
    heads = build_topology(sc, group)
    home = run.options["vicinity"].strip()
    head, neighbors = heads[home], _neighbors(sc, heads, home)
    rng = sc.substream(f"run:{run.name}")
    names = {h.id_v: n for n, h in heads.items()}
    csv_buf, text = io.StringIO(), []
    w = csv.writer(csv_buf, lineterminator="\n")
    w.writerow(HONEST_COLUMNS)
    last_token, last_server = None, home
    for i in range(run.get_int("joins")):
        ip = f"node-{i}".encode()
        friend = head.members[rng.randrange(len(head.members))]
        out = run_join(ip, head, friend, BASE_TIME + 1 + i, rng=rng, neighbors=neighbors)
        tr = out.transcript
        server = names.get(tr.forwarded_to, home) if tr.forwarded_to else home
        if out.accepted:
            verdict = "accepted"
            agree = tr.id_at_v == tr.id_at_b == tr.id_at_n
            id_text, probe = str(out.peer.id_n), out.peer.token.probe
            last_token, last_server = out.peer.token, server
        else:
            verdict, agree, id_text, probe = f"rejected:{tr.error}", False, "", ""
        w.writerow((sc.name, run.name, i, ip.decode(), server, id_text, probe,
                    int(tr.forwarded_to is not None), verdict, int(agree), *tr.ops.as_tuple()))
        text.append(tr.to_text())
    files = {f"{run.name}.csv": csv_buf.getvalue().encode(),
             f"{run.name}.transcript.txt": ("\n\n".join(text) + "\n").encode()}
    for name, h in heads.items():
        files[f"{name}.pub"] = h.pu_v.data
    if last_token is not None:
        files[f"{run.name}.token"] = encode_message(last_token)
    return files


def _run_traffic(sc: Scenario, run: RunSpec, group: Group) -> dict[str, bytes]:
    schemes = run.get_list("schemes", list(cost.SCHEMES))
    n = run.get_int("n_joins", 500)
    seed = f"{sc.seed}/run:{run.name}"
    curves = {s: cost.total_traffic(s, n, sc.cost, seed) for s in schemes}
    buf = io.StringIO()
    cost.write_traffic_csv(buf, sc.name, curves)
    return {f"{run.name}.csv": buf.getvalue().encode()}


def _run_sybil_bandwidth(sc: Scenario, run: RunSpec, group: Group) -> dict[str, bytes]:
    bits = _int_range(run.options.get("domain_bits", "1-10"))
    size = run.get_int("group_size", 64)
    seed = f"{sc.seed}/run:{run.name}"
    rows = []
    for b in bits:
        for mitigated in (False, True):
            curve = cost.sybil_bandwidth(b, mitigated, size, sc.cost, seed)
            rows.append((b, mitigated, size, curve[-1]))
    buf = io.StringIO()
    cost.write_sybil_csv(buf, sc.name, rows)
    return {f"{run.name}.csv": buf.getvalue().encode()}


def _run_attack(sc: Scenario, run: RunSpec, group: Group) -> dict[str, bytes]:
    heads = build_topology(sc, group)
    head = heads[run.options["vicinity"].strip()]
    cfg = sc.cost
    rows: list[tuple[str, adversary.AttackReport]] = []
    if run.kind == "sybil":
        k, ips = run.get_int("k"), run.get_int("ips", 1)
        collude = run.get_bool("collude", False)
        for j in range(ips):
            rep = adversary.run_sybil(k, f"sybil-{j}".encode(), head, f"{sc.seed}/{run.name}/{j}",
                                      collude=collude, cfg=cfg, now=BASE_TIME + 1)
            rows.append((f"{sc.name}:{run.name}:ip{j}", rep))
    elif run.kind == "mitm":
        cells = run.get_list("cells", ["all"])
        chosen = [c for c in adversary.tamper_cells()
                  if "all" in cells or f"{c[0]}.{c[1]}" in cells]
        sessions = run.get_int("sessions", 1)
        collude = run.get_bool("collude", False)
        for hop, fname in chosen:
            rep = adversary.run_mitm(head, (hop, fname), f"{sc.seed}/{run.name}",
                                     sessions=sessions, collude=collude, cfg=cfg,
                                     now=BASE_TIME + 1)
            rows.append((f"{sc.name}:{run.name}:{hop}.{fname}", rep))
    else:
        target = OverlayId.from_fields(sc.layout, head.id_v.enodeb, head.id_v.superpeer,
                                       run.get_int("target_node"))
        rep = adversary.run_eclipse(target, run.get_int("tries"), head,
                                    f"{sc.seed}/{run.name}", window=run.get_int("window", 1),
                                    cfg=cfg, now=BASE_TIME + 1)
        rows.append((f"{sc.name}:{run.name}", rep))
    buf = io.StringIO()
    adversary.write_reports_csv(buf, rows)
    return {f"{run.name}.csv": buf.getvalue().encode()}


_RUNNERS = {
    "honest": _run_honest,
    "traffic": _run_traffic,
    "sybil_bandwidth": _run_sybil_bandwidth,
    "sybil": _run_attack,
    "mitm": _run_attack,
    "eclipse": _run_attack,
}


def execute(sc: Scenario) -> dict[str, bytes]:
    """Run every declared run and return ``{file name: content}``; nothing is written."""
    group = get_group(sc.group_id)
    outputs: dict[str, bytes] = {}
    for run in sc.runs:
        try:
            files = _RUNNERS[run.kind](sc, run, group)
        except ProtocolError as exc:
            # honest-path failures inside topology setup are configuration problems
            raise ScenarioError(f"run {run.name!r} could not set up: {exc!r}", 3) from None
        for fname, content in files.items():
            outputs[f"{sc.name}.{fname}"] = content
    return outputs


def write_outputs(outputs: dict[str, bytes], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for fname in sorted(outputs):
            target = out / fname
            target.write_bytes(outputs[fname])
            written.append(target)
    except OSError as exc:
        raise ScenarioError(f"cannot write outputs: {exc}", 4) from None
    return written


def digest_outputs(outputs: dict[str, bytes]) -> str:
    h = hashlib.sha256()
    for fname in sorted(outputs):
        h.update(fname.encode() + b"\0" + outputs[fname])
    return h.hexdigest()
