"""Command-line entry point: ``uso run | verify-asset | verify-stacked | inspect``.

Exit status is 0 iff every check passed.  With ``--json`` results go to
stdout as JSON and errors to stderr as ``{"error": CODE, "message": ...}``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .. import codec
from ..anchoring import StackedProof, verify_stacked
from ..asset import Asset, IssuerPolicy, ProofOfProvenance, TrustBundle, verify_provenance
from ..errors import MalformedEncoding, UsoError
from .scenario import BUNDLED, export, run


def _load(path: str, expected=None):
    data = Path(path).read_bytes()
    if data[:1] == b"{":
        return codec.from_json(json.loads(data))
    return codec.load_file(data, expected)


def _self_policy(asset: Asset, provenance: ProofOfProvenance) -> IssuerPolicy:
    """Trust whatever the artifacts carry; only internal consistency is checked."""
    roots = {(e.root.ledger_id, e.root.epoch): e.root for e in provenance.entries}
    auth = asset.genesis.authority
    issuer = getattr(auth, "issuer", None)
    if issuer is None:
        issuer = auth.receipt.entry.voucher.body.bank
        roots[(auth.receipt.root.ledger_id, auth.receipt.root.epoch)] = auth.receipt.root
    ref = asset.genesis.vector.ledger_ref

    def resolve(lid, e):
        if (lid, e) in roots:
            return roots[(lid, e)]
        return object() if (lid, e) == (ref.ledger_id, ref.epoch) else None

    return IssuerPolicy({issuer}, resolve)


def cmd_run(args) -> int:
    result = run(args.script, args.seed)
    if args.export:
        export(result, args.export)
    if args.transcript:
        out = Path(args.transcript)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(result.transcript.to_jsonl())
    if args.json:
        print(json.dumps(result.summary(), indent=2))
    else:
        print(f"{result.name} (seed {result.seed}): {len(result.transcript)} messages, "
              f"{len(result.assertions)} assertions, {len(result.failures)} failed")
        for a in result.assertions:
            mark = "ok  " if a.ok else "FAIL"
            print(f"  [{mark}] step {a.index} {a.op}" + (f": {a.detail}" if a.detail else ""))
    return 0 if result.ok else 1


def cmd_verify_asset(args) -> int:
    asset = _load(args.asset, Asset)
    provenance = _load(args.provenance, ProofOfProvenance)
    if not isinstance(asset, Asset) or not isinstance(provenance, ProofOfProvenance):
        raise MalformedEncoding("expected an asset file and a provenance file")
    if args.roots:
        trust = _load(args.roots, TrustBundle)
        policy = trust.policy()
    else:
        policy = _self_policy(asset, provenance)
    report = verify_provenance(asset, provenance, policy)
    if args.json:
        print(json.dumps({
            "ok": report.ok,
            "trust": "file" if args.roots else "self-consistency",
            "updates": report.updates,
            "registered": report.registered,
            "failures": [{"check": c.name, "code": c.code, "detail": c.detail} for c in report.failures],
        }, indent=2))
    else:
        if not args.roots:
            print("note: no --roots given; checking internal consistency only")
        print(report.summary())
    return 0 if report.ok else 1


def cmd_verify_stacked(args) -> int:
    proof = _load(args.proof, StackedProof)
    try:
        top = bytes.fromhex(args.top_root)
    except ValueError:
        raise MalformedEncoding("top root must be hex") from None
    ok = len(top) == 32 and verify_stacked(proof, top)
    if args.json:
        print(json.dumps({"ok": ok, "layers": len(proof.layers)}))
    else:
        print(f"{'OK' if ok else 'FAILED'}: {len(proof.layers)}-layer stacked proof")
    return 0 if ok else 1


def cmd_inspect(args) -> int:
    obj = _load(args.file)
    print(json.dumps(codec.to_json(obj), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uso", description="USO asset simulator and verifier")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario script or a bundled scenario name",
                       epilog="bundled: " + ", ".join(BUNDLED))
    r.add_argument("script")
    r.add_argument("--seed", type=int)
    r.add_argument("--transcript", help="write the JSON-lines transcript here")
    r.add_argument("--export", metavar="DIR", help="write held assets, provenance and trust.bin")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify-asset", help="verify an asset against its proof of provenance")
    v.add_argument("asset")
    v.add_argument("provenance")
    v.add_argument("--roots", help="trust file with issuer keys and trusted roots")
    v.set_defaults(func=cmd_verify_asset)

    s = sub.add_parser("verify-stacked", help="verify a stacked proof against a top root")
    s.add_argument("proof")
    s.add_argument("top_root")
    s.set_defaults(func=cmd_verify_stacked)

    i = sub.add_parser("inspect", help="pretty-print any canonical artifact")
    i.add_argument("file")
    i.set_defaults(func=cmd_inspect)

    for sp in (r, v, s, i):
        sp.add_argument("--json", action="store_true", help="machine-readable output")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsoError, OSError, ValueError, TypeError, KeyError) as exc:
        code = getattr(exc, "code", None) if isinstance(exc, UsoError) else type(exc).__name__
        if args.json:
            print(json.dumps({"error": code, "message": str(exc)}), file=sys.stderr)
        else:
            print(f"error: {code}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
