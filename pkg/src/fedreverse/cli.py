"""Command-line pipelines: keygen, embed, extract, recover, attack, metrics, hist.

Every run is deterministic given its flags and seeds. Human-readable output
goes to stdout as key=value lines (plus optional CSV files); errors go to
stderr. Exit codes: 0 success, 2 usage error (bad flags, domain errors,
capacity), 3 data/format error (containers, key/plan mismatches), 4
verification failure (--expect mismatch).
"""

import argparse
import sys

import numpy as np

from . import container as cio
from . import keygen as kg
from .attacks import ATTACK_KINDS, AttackSpec, apply_attack
from .errors import CapacityError, FedReverseError, MetricUndefinedError, ParameterError
from .lattice import DcParams
from .metrics import distortion_report, empirical_mse, theoretical_mse_fed, write_report_csv
from .multiparty import Payload, embed_payloads, extract_payload, recover_sequence


def _parse_floats(text: str, n: int, flag: str) -> list[float]:
    vals = [float(x) for x in text.split(",") if x != ""]
    if len(vals) == 1:
        vals = vals * n
    if len(vals) != n:
        raise ParameterError(f"{flag} needs 1 or {n} comma-separated values, got {len(vals)}")
    return vals


def _parse_payload(arg: str) -> Payload:
    if "=" not in arg:
        raise ParameterError(f"payload {arg!r} must look like ID=HEX, ID=HEX:BITS or ID=@FILE")
    cid, _, rest = arg.partition("=")
    bits = None
    if ":" in rest:
        rest, _, bits_text = rest.rpartition(":")
        bits = int(bits_text)
    if rest.startswith("@"):
        with open(rest[1:], "rb") as fh:
            data = fh.read()
    else:
        data = bytes.fromhex(rest)
    return Payload(client_id=cid, data=data, bit_length=bits)


def _selection_from_args(args, count: int) -> cio.SelectionSpec:
    seed = bytes.fromhex(args.location_seed) if args.location_seed else bytes(32)
    return cio.SelectionSpec(
        tensor_name=args.tensor, count=count, permute=args.permute, location_seed=seed
    )


def cmd_keygen(args) -> int:
    quotas = [int(x) for x in args.clients.split(",") if x != ""]
    n = len(quotas)
    deltas = _parse_floats(args.delta, n, "--delta")
    alphas = _parse_floats(args.alpha, n, "--alpha")
    contribs = []
    for path in args.contrib or []:
        with open(path, "rb") as fh:
            contribs.append(fh.read())
    total_bits = args.B * args.r * args.r
    if args.key_int is not None:
        key_int = args.key_int % (1 << total_bits)
    elif contribs:
        key_int = kg.master_key_int(contribs, total_bits)
    else:
        raise ParameterError("provide --contrib files or --key-int")
    cfg = kg.KeygenConfig(
        bits_per_entry=args.B,
        dimension=args.r,
        entry_range=args.q,
        key_int=key_int,
        client_quotas=tuple(quotas),
    )
    dc_params = [DcParams(delta=d, alpha=a, bits=args.bits) for d, a in zip(deltas, alphas)]
    if len(contribs) == n:
        secrets = contribs
    else:
        secrets = [f"fedreverse-dither:{i + 1}".encode() for i in range(n)]
    keys, km = kg.generate_client_keys(cfg, dc_params, client_secrets=secrets)
    kg.save_keys(args.out, keys, cfg)
    print(f"keymat_digest={kg.keymat_digest(km)}")
    print(f"clients={','.join(k.client_id for k in keys)}")
    print(f"out={args.out}")
    return 0


def cmd_import_raw(args) -> int:
    shape = [int(d) for d in args.shape.split(",") if d != ""]
    cont = cio.load_raw(args.raw, args.dtype, shape, name=args.name)
    cio.write_container(cont, args.out)
    print(f"tensor={args.name}")
    print(f"elements={cont.tensor(args.name).size}")
    print(f"out={args.out}")
    return 0


def cmd_embed(args) -> int:
    cont = cio.read_container(args.weights)
    keys = kg.load_keys(args.keys)
    tensor = cont.tensor(args.tensor)
    count = args.count if args.count else tensor.size
    selection = _selection_from_args(args, count)
    cover, indices = cio.select_cover(cont, selection)
    num_blocks = count // args.dim
    payloads = [_parse_payload(p) for p in args.payload or []]
    bit_lengths = {p.client_id: p.bit_length for p in payloads}
    plan = cio.PlanManifest(
        selection=selection,
        dimension=args.dim,
        num_blocks=num_blocks,
        tail_length=count - args.dim * num_blocks,
        clients=tuple((k.client_id, bit_lengths.get(k.client_id, 0)) for k in keys),
        key_digest=kg.key_file_digest(args.keys),
    )
    watermarked = embed_payloads(cover, plan.embedding_plan(), payloads, keys)
    out = cio.write_back(cont, args.tensor, indices, watermarked)
    cio.write_container(out, args.out)
    cio.save_plan(args.manifest, plan)
    print(f"blocks={num_blocks}")
    print(f"mse_emp={empirical_mse(cover, watermarked)!r}")
    print(f"mse_theory_per_element={theoretical_mse_fed(keys) / args.dim!r}")
    try:
        report = distortion_report(cover, watermarked, keys, args.dim)
        print(f"swr_db={report.empirical_swr_db!r}")
    except MetricUndefinedError:
        print("swr_db=undefined")
    print(f"out={args.out}")
    print(f"manifest={args.manifest}")
    return 0


def cmd_extract(args) -> int:
    cont = cio.read_container(args.weights)
    keys = kg.load_keys(args.keys)
    plan = cio.load_plan(args.manifest)
    key = next((k for k in keys if k.client_id == args.client), None)
    if key is None:
        raise FedReverseError(f"client {args.client!r} not in key file")
    values, _ = cio.select_cover(cont, plan.selection)
    bit_length = plan.bit_length_of(args.client)
    payload = extract_payload(values, plan.embedding_plan(), key, bit_length)
    print(f"client={args.client}")
    print(f"bit_length={bit_length}")
    print(f"payload={payload.hex()}")
    if args.expect is not None:
        expected = bytes.fromhex(args.expect)
        match = expected == payload
        print(f"match={int(match)}")
        return 0 if match else 4
    return 0


def cmd_recover(args) -> int:
    cont = cio.read_container(args.weights)
    plan = cio.load_plan(args.manifest)
    cio.check_key_digest(plan, args.keys)
    keys = kg.load_keys(args.keys)
    values, indices = cio.select_cover(cont, plan.selection)
    restored = recover_sequence(values, plan.embedding_plan(), keys)
    out = cio.write_back(cont, plan.selection.tensor_name, indices, restored)
    cio.write_container(out, args.out)
    print(f"out={args.out}")
    if args.original:
        orig = cio.read_container(args.original)
        err = 0.0
        for name in orig.tensors:
            a = orig.tensor(name).astype(np.float64)
            b = out.tensor(name).astype(np.float64)
            err = max(err, float(np.max(np.abs(a - b))) if a.size else 0.0)
        print(f"max_abs_error={err!r}")
    return 0


def cmd_attack(args) -> int:
    cont = cio.read_container(args.weights)
    tensors = {}
    for i, name in enumerate(sorted(cont.tensors)):
        arr = cont.tensor(name)
        spec = AttackSpec(kind=args.kind, magnitude=args.magnitude, seed=(args.seed + i) % 2**64)
        attacked = apply_attack(arr.ravel(), spec)
        tensors[name] = attacked.astype(arr.dtype).reshape(arr.shape)
    cio.write_container(cio.WeightContainer(tensors), args.out)
    print(f"kind={args.kind}")
    print(f"magnitude={args.magnitude!r}")
    print(f"seed={args.seed}")
    print(f"out={args.out}")
    return 0


def _flat_all(cont: cio.WeightContainer) -> np.ndarray:
    parts = [cont.tensor(name).ravel().astype(np.float64) for name in sorted(cont.tensors)]
    return np.concatenate(parts) if parts else np.empty(0)


def cmd_metrics(args) -> int:
    orig = cio.read_container(args.original)
    wm = cio.read_container(args.watermarked)
    s, y = _flat_all(orig), _flat_all(wm)
    print(f"mse_emp={empirical_mse(s, y)!r}")
    keys = kg.load_keys(args.keys) if args.keys else None
    row = {"mse_emp": empirical_mse(s, y)}
    if keys:
        row["n"] = len(keys)
        deltas = sorted({k.dc.delta for k in keys})
        alphas = sorted({k.dc.alpha for k in keys})
        row["delta"] = ";".join(repr(d) for d in deltas)
        row["alpha"] = ";".join(repr(a) for a in alphas)
        theory = theoretical_mse_fed(keys)
        if args.dim:
            row["r"] = args.dim
            theory /= args.dim
        row["mse_theory"] = theory
        print(f"mse_theory={theory!r}")
    report = distortion_report(s, y)  # raises MetricUndefinedError on identical inputs
    row["swr_db"] = report.empirical_swr_db
    print(f"swr_db={report.empirical_swr_db!r}")
    if args.csv:
        write_report_csv(args.csv, [row])
        print(f"csv={args.csv}")
    return 0


def cmd_hist(args) -> int:
    cont = cio.read_container(args.weights)
    values = cont.tensor(args.tensor).ravel()
    value_range = None
    if args.range:
        lo, hi = (float(x) for x in args.range.split(","))
        value_range = (lo, hi)
    counts, edges = cio.histogram(values, args.bins, value_range)
    with open(args.csv, "w", encoding="utf-8") as fh:
        fh.write("bin_left,bin_right,count\n")
        for i, c in enumerate(counts):
            fh.write(f"{edges[i]!r},{edges[i + 1]!r},{int(c)}\n")
    print(f"total={int(counts.sum())}")
    print(f"csv={args.csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedreverse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate orthogonal client keys")
    p.add_argument("--r", type=int, required=True, help="dimension of the key matrix and blocks")
    p.add_argument("--clients", required=True, help="comma-separated per-client quotas n_i")
    p.add_argument("--B", type=int, required=True, help="bits per matrix entry")
    p.add_argument("--q", type=int, required=True, help="entry range (power of two >= 2^B)")
    p.add_argument("--delta", default="0.1", help="per-client delta (1 value or n)")
    p.add_argument("--alpha", default="0.9", help="per-client alpha (1 value or n)")
    p.add_argument("--bits", type=int, default=1, help="payload bits per coefficient")
    p.add_argument("--contrib", nargs="*", help="client contribution files (seed material)")
    p.add_argument("--key-int", type=int, default=None, help="bypass: literal key integer")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("import-raw", help="wrap a raw little-endian float file as FRWC1")
    p.add_argument("--raw", required=True)
    p.add_argument("--dtype", choices=("f32", "f64"), required=True)
    p.add_argument("--shape", required=True, help="comma-separated dimensions")
    p.add_argument("--name", default="weights")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_import_raw)

    p = sub.add_parser("embed", help="embed per-client payloads into container weights")
    p.add_argument("--weights", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--tensor", required=True)
    p.add_argument("--count", type=int, default=0, help="cover elements (default: whole tensor)")
    p.add_argument("--dim", type=int, required=True, help="block dimension r")
    p.add_argument("--payload", action="append", help="ID=HEX, ID=HEX:BITS or ID=@FILE")
    p.add_argument("--permute", action="store_true", help="permuted cover selection")
    p.add_argument("--location-seed", default="", help="32-byte hex seed for --permute")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("extract", help="extract one client's payload")
    p.add_argument("--weights", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--client", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--expect", default=None, help="hex payload; sets exit code 0/4")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("recover", help="restore the original weights with all keys")
    p.add_argument("--weights", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--original", default=None, help="reference container for error report")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("attack", help="apply a seeded attack to container weights")
    p.add_argument("--weights", required=True)
    p.add_argument("--kind", choices=ATTACK_KINDS, required=True)
    p.add_argument("--magnitude", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("metrics", help="distortion metrics between two containers")
    p.add_argument("--original", required=True)
    p.add_argument("--watermarked", required=True)
    p.add_argument("--keys", default=None)
    p.add_argument("--dim", type=int, default=0, help="block dimension for per-element theory")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("hist", help="histogram of a tensor to CSV")
    p.add_argument("--weights", required=True)
    p.add_argument("--tensor", required=True)
    p.add_argument("--bins", type=int, required=True)
    p.add_argument("--range", default=None, help="lo,hi bin range")
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_hist)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, CapacityError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FedReverseError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
