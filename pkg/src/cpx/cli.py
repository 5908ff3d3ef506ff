"""Command-line interface: ``cpx <group> <command> [options]``.

Exit codes: 0 success, 1 usage, 2 scenario failure, 3 verification
failure, 4 I/O or corrupt input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .agents import connect, issue_credential
from .audit import load_jsonl, verify_chain
from .errors import ConfigInvalid, CorruptExport, CpxError, StepFailed, UnknownRequest, UnsupportedVersion
from .presentation import CHECK_ORDER, Presentation, ProofRequest, RequestedAttribute, Unsatisfiable
from .scenario.config import DEFAULT_CONFIG, EcosystemConfig
from .scenario.ecosystem import Ecosystem, setup_ecosystem
from .scenario.engine import run_script
from .scenario.metrics import format_metrics
from .scenario.principles import PrinciplesReport, format_principles, run_principles_checks
from .scenario.script import ScenarioScript, default_career_script
from .wallet import AlwaysAsk, import_wallet

EXIT_OK, EXIT_USAGE, EXIT_SCENARIO, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _seed(args) -> int:
    env = os.environ.get("CPX_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"CPX_SEED must be an integer, got {env!r}") from None
    return args.seed


def _guard_output(profile: str, path) -> None:
    if profile == "TOY" and path is not None and "production" in str(path).lower():
        raise UsageError("TOY profile refuses to write under a path mentioning 'production'")


def _read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _config(args) -> EcosystemConfig:
    if getattr(args, "config", None):
        return EcosystemConfig.from_json(_read_json(args.config)).validate()
    return DEFAULT_CONFIG


# --- ecosystem / scenario -------------------------------------------------------


def cmd_ecosystem_init(args) -> int:
    _guard_output(args.profile, args.state)
    eco = setup_ecosystem(_config(args), seed=_seed(args), params=args.profile)
    eco.save(args.state)
    print(f"ecosystem with {len(eco.registry.dids())} public DIDs and {len(eco.registry)} registry entries")
    print(f"state written to {args.state}")
    return EXIT_OK


def cmd_scenario_script(args) -> int:
    text = json.dumps(default_career_script().to_json(), indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_scenario_run(args) -> int:
    _guard_output(args.profile, args.out)
    script = ScenarioScript.load(args.script) if args.script else default_career_script()
    eco = setup_ecosystem(_config(args), seed=_seed(args), params=args.profile)
    try:
        trace = run_script(eco, script)
    except StepFailed as exc:
        print(f"scenario failed at {exc.moment} step {exc.step}: {exc.cause!r}", file=sys.stderr)
        return EXIT_SCENARIO
    trace.principles = run_principles_checks(trace, eco, mutations=args.mutations)
    out = trace.export(args.out)
    eco.save(out / "state")
    print(format_metrics(trace.metrics))
    print()
    print(format_principles(trace.principles))
    print(f"\ntrace written to {out}")
    return EXIT_OK


# --- wallet ---------------------------------------------------------------------


def cmd_wallet_list(args) -> int:
    eco = Ecosystem.load(args.state)
    data = eco.holder.list_all_data()
    if args.json:
        print(json.dumps(data, indent=1, sort_keys=True))
        return EXIT_OK
    print(f"{'credential_id':<34} {'schema':<24} issued_at")
    for c in data["credentials"]:
        print(f"{c['credential_id']:<34} {c['schema_id']:<24} {c['issued_at']}")
        for name, value in c["values"].items():
            print(f"    {name} = {value}")
    print(f"{len(data['connections'])} connections, {len(data['consent_log'])} consent decisions")
    return EXIT_OK


def cmd_wallet_export(args) -> int:
    eco = Ecosystem.load(args.state)
    Path(args.out).write_text(eco.holder.export_wallet())
    print(f"wallet exported to {args.out}")
    return EXIT_OK


def cmd_wallet_import(args) -> int:
    eco = Ecosystem.load(args.state)
    wallet = import_wallet(Path(args.file).read_text(), eco.params, eco.registry)
    eco.holder.adopt_wallet(wallet)
    eco.save(args.state)
    print(f"imported {len(wallet.credentials)} credentials")
    return EXIT_OK


# --- single interactions ------------------------------------------------------------


def cmd_issue(args) -> int:
    eco = Ecosystem.load(args.state)
    issuer = eco.agent(args.issuer)
    values = _read_json(args.values) if Path(args.values).exists() else json.loads(args.values)
    eco.clock.tick()
    outcome, cred = issue_credential(issuer, eco.holder, args.schema, values)
    eco.save(args.state)
    if args.out:
        _write_json(args.out, cred.to_json(eco.params))
    print(f"{cred.credential_id} {args.schema}: {outcome}")
    return EXIT_OK if outcome.accepted else EXIT_VERIFY


def _requested(spec: str, eco: Ecosystem) -> RequestedAttribute:
    name, _, rest = spec.partition("/")
    schema, _, issuer = rest.partition("/")
    return RequestedAttribute(name, schema or None, eco.did_of(issuer) if issuer else None)


def cmd_request_proof(args) -> int:
    eco = Ecosystem.load(args.state)
    verifier = eco.agent(args.verifier)
    requested = [_requested(a, eco) for a in args.attr]
    v_conn, _ = connect(verifier, eco.holder)
    request = verifier.create_proof_request(v_conn, requested)
    eco.holder.receive("proof-request")
    eco.save(args.state)
    _write_json(args.out, {"verifier": verifier.name, "request": request.to_json()})
    print(f"proof request {request.request_id} written to {args.out}")
    return EXIT_OK


def cmd_present(args) -> int:
    eco = Ecosystem.load(args.state)
    doc = _read_json(args.request)
    request = ProofRequest.from_json(doc["request"])
    verifier = eco.agent(doc["verifier"])
    holder = eco.holder
    conn = holder.connection_to(verifier)
    if conn is None:
        raise CpxError(f"no connection with {verifier.name}")
    consent = holder.decide_consent(conn, request, AlwaysAsk(lambda _r: not args.deny, name="cli"))
    if not consent.allowed:
        verifier.receive("problem-report")
        eco.save(args.state)
        print("consent denied; nothing presented")
        return EXIT_VERIFY
    selection = holder.select_credentials(request)
    if isinstance(selection, Unsatisfiable):
        eco.save(args.state)
        print(f"cannot satisfy request; missing {', '.join(selection.missing)}", file=sys.stderr)
        return EXIT_VERIFY
    pres = holder.present(conn, request, selection.default, consent)
    verifier.receive("presentation")
    eco.save(args.state)
    _write_json(args.out, {"verifier": verifier.name, "presentation": pres.to_json(eco.params)})
    print(f"presentation for {request.request_id} written to {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    eco = Ecosystem.load(args.state)
    req_doc = _read_json(args.request)
    pres_doc = _read_json(args.presentation)
    verifier = eco.agent(req_doc["verifier"])
    request = ProofRequest.from_json(req_doc["request"])
    try:
        pres = Presentation.from_json(eco.params, pres_doc["presentation"])
    except (KeyError, TypeError, ValueError) as exc:
        print(f"rejected: unparseable presentation ({exc})")
        return EXIT_VERIFY
    eco.clock.tick()
    result = verifier.verify_presentation(request, pres)
    eco.save(args.state)
    for check in CHECK_ORDER:
        print(f"{check:<11} {'ok' if result.checks[check] else 'FAILED'}")
    for problem in result.problems:
        print(f"  {problem}")
    print("accepted" if result.accepted else "rejected")
    return EXIT_OK if result.accepted else EXIT_VERIFY


# --- audit / reports ------------------------------------------------------------


def cmd_audit_verify(args) -> int:
    try:
        events = load_jsonl(Path(args.log).read_text())
    except (KeyError, TypeError, ValueError) as exc:
        print(f"unreadable audit log: {exc}", file=sys.stderr)
        return EXIT_IO
    status = verify_chain(events)
    print(status)
    return EXIT_OK if status else EXIT_VERIFY


def cmd_report_metrics(args) -> int:
    from .figures import render_metrics_figures

    trace_dir = Path(args.trace)
    metrics = _read_json(trace_dir / "metrics.json")
    out = Path(args.out) if args.out else trace_dir
    print(format_metrics(metrics))
    figures = render_metrics_figures(metrics, out)
    _write_json(
        out / "metrics_report.json",
        {"rows": metrics["rows"], "totals": metrics["totals"], "figures": [p.name for p in figures]},
    )
    print(f"\nfigures: {', '.join(str(p) for p in figures)}")
    return EXIT_OK


def cmd_report_principles(args) -> int:
    trace_dir = Path(args.trace)
    report = PrinciplesReport.from_json(_read_json(trace_dir / "principles.json"))
    out = Path(args.out) if args.out else trace_dir
    out.mkdir(parents=True, exist_ok=True)
    print(format_principles(report))
    _write_json(out / "principles_report.json", report.to_json())
    return EXIT_OK if report.all_passed else EXIT_VERIFY


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cpx", description="Credential ecosystem simulator for healthcare careers.")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def common(p, state=True):
        p.add_argument("--profile", choices=("PRODUCTION", "TOY"), default="PRODUCTION")
        p.add_argument("--seed", type=int, default=0)
        if state:
            p.add_argument("--state", required=True, help="ecosystem state directory")

    eco = groups.add_parser("ecosystem").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = eco.add_parser("init")
    common(p)
    p.add_argument("--config")
    p.set_defaults(func=cmd_ecosystem_init)

    sc = groups.add_parser("scenario").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = sc.add_parser("run")
    common(p, state=False)
    p.add_argument("--script")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--mutations", type=int, default=200, help="tamper-fuzz budget for the principles report")
    p.set_defaults(func=cmd_scenario_run)
    p = sc.add_parser("script", help="print the default career script")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scenario_script)

    wl = groups.add_parser("wallet").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = wl.add_parser("list")
    p.add_argument("--state", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_wallet_list)
    p = wl.add_parser("export")
    p.add_argument("--state", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_wallet_export)
    p = wl.add_parser("import")
    p.add_argument("--state", required=True)
    p.add_argument("--file", required=True)
    p.set_defaults(func=cmd_wallet_import)

    p = groups.add_parser("issue")
    p.add_argument("--state", required=True)
    p.add_argument("--issuer", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--values", required=True, help="JSON object or path to one")
    p.add_argument("--out")
    p.set_defaults(func=cmd_issue)

    p = groups.add_parser("request-proof")
    p.add_argument("--state", required=True)
    p.add_argument("--verifier", required=True)
    p.add_argument("--attr", action="append", required=True, help="name[/schema_id[/issuer name]]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_request_proof)

    p = groups.add_parser("present")
    p.add_argument("--state", required=True)
    p.add_argument("--request", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--deny", action="store_true", help="refuse consent")
    p.set_defaults(func=cmd_present)

    p = groups.add_parser("verify")
    p.add_argument("--state", required=True)
    p.add_argument("--request", required=True)
    p.add_argument("--presentation", required=True)
    p.set_defaults(func=cmd_verify)

    au = groups.add_parser("audit").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = au.add_parser("verify")
    p.add_argument("--log", required=True)
    p.set_defaults(func=cmd_audit_verify)

    rp = groups.add_parser("report").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func in (("metrics", cmd_report_metrics), ("principles", cmd_report_principles)):
        p = rp.add_parser(name)
        p.add_argument("--trace", required=True)
        p.add_argument("--out")
        p.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorruptExport, UnsupportedVersion, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigInvalid, UnknownRequest) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CpxError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
