"""The ten acceptance criteria, one test each.

Every test records a PASS/FAIL line; the lines are printed together at the
end of the pytest run under "acceptance criteria".
"""

import copy
import random
import time
from dataclasses import replace

from cpx.audit import AuditLog, verify_chain
from cpx.clock import SimClock
from cpx.crypto import PRODUCTION, TOY, SchnorrSignature, commit, keygen, prove_equal_secret, sign, verify_equal_secret, verify_sig
from cpx.presentation import Presentation, ProofRequest, RequestedAttribute, check_presentation
from cpx.scenario.config import GMC
from cpx.scenario.ecosystem import setup_ecosystem
from cpx.scenario.engine import run_script
from cpx.scenario.metrics import CITED, TimeModel
from cpx.scenario.principles import run_principles_checks
from cpx.scenario.script import default_career_script
from cpx.tamper import (
    FuzzOutcome,
    forge_with_guessed_secret,
    forge_with_random_proof,
    forge_with_replayed_proof,
    fresh_table,
    fuzz_credential,
    fuzz_presentation,
)

import oracles


def _fresh_career(seed=1):
    eco = setup_ecosystem(seed=seed)
    return eco, run_script(eco, default_career_script())


def _accepted(trace):
    return [e for e in trace.exchanges if e.accepted]


# 1 -------------------------------------------------------------------------------


def test_c01_career_scenario(criterion):
    start = time.perf_counter()
    eco, trace = _fresh_career()
    elapsed = time.perf_counter() - start
    schemas = [c.body.schema_id for c in eco.holder.wallet.credentials]
    required = [
        "medical_degree:1" in schemas,
        "gmc_license:1" in schemas,
        "identity_verification:1" in schemas or "employment:1" in schemas,
        "training_record:1" in schemas,
        "rcpe_accreditation:1" in schemas,
        "qualified_physician:1" in schemas,
    ]
    ok = eco.params is PRODUCTION and len(schemas) >= 6 and all(required) and elapsed < 10
    criterion(1, ok, f"{len(schemas)} credentials, all required kinds={all(required)}, {elapsed:.2f}s PRODUCTION")


# 2 -------------------------------------------------------------------------------


def test_c02_tamper_suite(criterion, career):
    eco, trace = career
    rng = random.Random("acceptance/tamper")
    total = FuzzOutcome()
    for cred in eco.holder.wallet.credentials:
        total = total.add(fuzz_credential(eco.params, eco.registry, cred, 60, rng))
    for e in _accepted(trace):
        request = ProofRequest.from_json(e.request)
        pres = Presentation.from_json(eco.params, e.presentation)
        total = total.add(fuzz_presentation(eco.params, eco.registry, request, pres, 60, rng))
    ok = total.attempts >= 1000 and total.accepted == 0
    criterion(2, ok, f"{total.attempts} mutations, {total.accepted} accepted, {total.unparseable} unparseable")


# 3 -------------------------------------------------------------------------------


def test_c03_replay_suite(criterion):
    eco, trace = _fresh_career()
    replays = rejected_on_nonce = 0
    for e in _accepted(trace):
        verifier = eco.agent(e.verifier)
        result = verifier.verify_presentation(
            ProofRequest.from_json(e.request), Presentation.from_json(eco.params, e.presentation)
        )
        replays += 1
        rejected_on_nonce += (not result.accepted) and not result.checks["nonce"]
    ok = replays > 0 and rejected_on_nonce == replays
    criterion(3, ok, f"{rejected_on_nonce}/{replays} replayed presentations rejected on the nonce check")


# 4 -------------------------------------------------------------------------------


def test_c04_non_transferability(criterion, career):
    eco, trace = career
    params = eco.params
    stolen = list(eco.holder.wallet.credentials)  # full records, blindings included
    by_schema = {c.body.schema_id: c for c in stolen}
    rng = random.Random("acceptance/forgery")
    plans = [
        (("full_name", "gmc_number"), ("medical_degree:1", "gmc_license:1")),
        (("degree",), ("medical_degree:1",)),
        (("gmc_number", "specialty"), ("gmc_license:1", "qualified_physician:1")),
    ]
    captured = Presentation.from_json(params, _accepted(trace)[-1].presentation)
    attempts = accepted = 0
    for i in range(1002):
        names, schemas = plans[i % len(plans)]
        creds = [by_schema[s] for s in schemas]
        request = ProofRequest(
            f"forge-{i}", eco.did_of(GMC), rng.randbytes(16),
            tuple(RequestedAttribute(n, s) for n, s in zip(names, schemas)), "2029-09-30T09:00:00Z",
        )
        assignment = tuple(c.credential_id for c in creds)
        strategy = i % 3
        if strategy == 0:
            fake = forge_with_guessed_secret(params, request, assignment, creds, rng)
        elif strategy == 1:
            fake = forge_with_random_proof(params, request, assignment, creds, rng)
        else:
            fake = forge_with_replayed_proof(captured, request)
        result = check_presentation(params, request, fake, eco.registry, fresh_table(request), request.created_at)
        attempts += 1
        accepted += result.accepted
    ok = params is PRODUCTION and attempts >= 1000 and accepted == 0
    criterion(4, ok, f"{attempts} PRODUCTION forgery attempts without the link secret, {accepted} accepted")


# 5 -------------------------------------------------------------------------------


def test_c05_minimalization(criterion, career):
    _, trace = career
    accepted = _accepted(trace)
    exact = 0
    for e in accepted:
        requested = sorted(a["name"] for a in e.request["requested"])
        disclosed = sorted(d["name"] for pc in e.presentation["credentials"] for d in pc["disclosed"])
        exact += requested == disclosed
    ok = bool(accepted) and exact == len(accepted)
    criterion(5, ok, f"{exact}/{len(accepted)} accepted presentations disclose exactly the requested set")


# 6 -------------------------------------------------------------------------------


def test_c06_toy_oracles(criterion):
    start = time.perf_counter()
    rng = random.Random("acceptance/oracles")
    n = 120

    schnorr_agree = 0
    for i in range(n):
        sk = rng.randrange(TOY.q)
        pk = keygen(TOY, sk=sk).pk
        msg = rng.randbytes(rng.randrange(1, 16))
        sig = sign(TOY, sk, msg, rng)
        if i % 2:
            sig = SchnorrSignature(rng.randrange(TOY.q), rng.randrange(TOY.q))
        schnorr_agree += verify_sig(TOY, pk, msg, sig) == oracles.schnorr_accepts(pk, msg, sig.challenge, sig.response)

    binding_agree = 0
    for _ in range(n):
        s, r = rng.randrange(TOY.q), rng.randrange(TOY.q)
        C = commit(TOY, s, r).element
        same_s = [r2 for r2 in range(TOY.q) if pow(oracles.G, s, oracles.P) * pow(oracles.HGEN, r2, oracles.P) % oracles.P == C]
        same_r = [s2 for s2 in range(TOY.q) if pow(oracles.G, s2, oracles.P) * pow(oracles.HGEN, r, oracles.P) % oracles.P == C]
        binding_agree += same_s == [r] and same_r == [s] and oracles.dlog(C) == (s + oracles.X_H * r) % TOY.q

    equal_agree = 0
    for i in range(n):
        k = rng.randrange(1, 4)
        secret = rng.randrange(TOY.q)
        secrets = [secret if i % 2 == 0 or j == 0 else rng.randrange(TOY.q) for j in range(k)]
        blinds = [rng.randrange(TOY.q) for _ in range(k)]
        cs = [commit(TOY, a, b) for a, b in zip(secrets, blinds)]
        proof = prove_equal_secret(TOY, cs, list(zip(secrets, blinds)), b"ctx", rng)
        expected = oracles.equal_secret_accepts([c.element for c in cs], proof.commitments, proof.challenge,
                                                proof.responses, b"ctx")
        equal_agree += verify_equal_secret(TOY, cs, proof, b"ctx") == expected
    elapsed = time.perf_counter() - start
    ok = schnorr_agree == binding_agree == equal_agree == n and elapsed < 60
    criterion(6, ok, f"agreement schnorr {schnorr_agree}/{n}, binding {binding_agree}/{n}, "
                     f"equal-secret {equal_agree}/{n} in {elapsed:.1f}s")


# 7 -------------------------------------------------------------------------------

_FIELDS = ("index", "timestamp", "actor_did", "event_type", "payload", "payload_digest", "prev_hash", "hash")


def _corrupt(event, field):
    value = getattr(event, field)
    if isinstance(value, int):
        new = value + 1
    elif isinstance(value, bytes):
        new = bytes([value[0] ^ 1]) + value[1:]
    elif isinstance(value, dict):
        new = {**value, "tampered": True}
    else:
        new = value[:-1] + chr(ord(value[-1]) ^ 1)
    return replace(event, **{field: new})


def test_c07_audit_integrity(criterion):
    log = AuditLog(SimClock())
    types = ("ConnectionEstablished", "Issued", "ConsentGranted", "Verified", "Revoked", "RegistryWrite")
    for i in range(100):
        log.append(f"did:cpx:actor{i % 7}", types[i % len(types)], {"credential_id": f"c{i % 5}", "n": i})
    events = log.events
    cases = exact = 0
    for i in range(len(events)):
        for field in _FIELDS:
            mutated = events[:i] + [_corrupt(events[i], field)] + events[i + 1:]
            status = verify_chain(mutated)
            cases += 1
            exact += (not status.ok) and status.first_bad_index == i

    eco, trace = _fresh_career()
    gmc = eco.agent(GMC)
    license_id = next(c.credential_id for c in eco.holder.wallet.credentials if c.body.schema_id == "gmc_license:1")
    gmc.revoke_credential(license_id, "acceptance check: licence withdrawn")
    history = [ev.event_type for ev in eco.audit.trace_credential(license_id)]
    shape = history[0] == "Issued" and history[-1] == "Revoked" and set(history[1:-1]) == {"Verified"} and len(history) > 2
    ok = len(events) == 100 and exact == cases == 100 * len(_FIELDS) and shape
    criterion(7, ok, f"{exact}/{cases} field mutations located exactly; gmc_license history "
                     f"{history[0]} -> {len(history) - 2} x Verified -> {history[-1]}")


# 8 -------------------------------------------------------------------------------


def test_c08_metrics_model(criterion, career):
    _, trace = career
    tm = TimeModel()
    cited = {t.name: t.days for t in tm.baseline["Rotation"] if t.source == CITED}
    rotation_records = [m for m in trace.moments if m.kind == "Rotation"]
    expected_baseline = sum(tm.baseline_days(m.kind) for m in rotation_records)
    expected_ssi = sum(m.interactions for m in rotation_records) * tm.ssi_minutes_per_interaction / 60 / tm.hours_per_day
    row = trace.metrics.row("Rotation")
    appraisals = trace.metrics.row("AppraisalRevalidation").occurrences
    years = int(trace.script.career_end[:4]) - int(trace.script.career_start[:4])
    ok = (
        row.baseline_days == expected_baseline
        and row.ssi_days == expected_ssi
        and row.baseline_days >= 4.0
        and row.ssi_days <= 0.02
        and sum(cited.values()) >= 4.0
        and appraisals == 3
        and years == 9
    )
    criterion(8, ok, f"rotation baseline {row.baseline_days:.4f} d (cited part {sum(cited.values()):.1f}) vs "
                     f"SSI {row.ssi_days:.6f} d; {appraisals} appraisals over {years} years")


# 9 -------------------------------------------------------------------------------


def test_c09_principles_report(criterion, career):
    eco, trace = career
    report = run_principles_checks(trace, eco)
    allows = [i for i, c in enumerate(trace.consent_log) if c["decision"] == "Allow"]
    injected = replace(trace, consent_log=[c for i, c in enumerate(trace.consent_log) if i != allows[-1]])
    bad = run_principles_checks(injected, eco)
    flipped = [a.principle for a, b in zip(report.checked, bad.checked) if a.status != b.status]
    order = [r.principle for r in report.checked][:4]
    ok = report.all_passed and flipped == ["Consent"] and order == ["Protection", "Control", "Consent", "Interoperability"]
    criterion(9, ok, f"{sum(r.passed for r in report.checked)}/{len(report.checked)} checks pass; "
                     f"consent injection flips {flipped}; order starts {', '.join(order)}")


# 10 ------------------------------------------------------------------------------


def test_c10_determinism(criterion, tmp_path):
    dirs = []
    for i in range(2):
        eco, trace = _fresh_career(seed=4)
        trace.principles = run_principles_checks(trace, eco, mutations=50)
        dirs.append(trace.export(tmp_path / f"run{i}"))
    names = sorted(p.name for p in dirs[0].iterdir())
    same = [n for n in names if (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes()]
    ok = names == sorted(p.name for p in dirs[1].iterdir()) and same == names and len(names) >= 7
    criterion(10, ok, f"{len(same)}/{len(names)} exported files byte-identical across two seed-4 runs")
