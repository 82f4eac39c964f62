"""Command-line entry point: train / eval / synth / gradcheck.

Every command is deterministic given its flags and seed; reports echo the
full effective configuration.  A JSON config file (same schema as the
report's config echo, keys ``model_config`` and ``train_config``) can
predefine settings; explicit flags win.  Exit codes: 0 ok, 1 internal
failure, 2 bad input.
"""

import argparse
import json
import os
import sys
from dataclasses import fields

from . import data, gradcheck, training
from .errors import StgnnError
from .model import ModelConfig, load_checkpoint
from .training import TrainConfig

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_BAD_INPUT = 2


class CliError(StgnnError):
    """User-facing input problem; maps to exit code 2."""


def _default_seed() -> int:
    return int(os.environ.get("STGNN_SEED", "0"))


def _load_config_file(path):
    if path is None:
        return {}, {}
    if not os.path.exists(path):
        raise CliError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    # a previously written report.json is itself a valid config file
    allowed = {"model_config", "train_config"}
    ignored = {"runs", "aggregate", "context"}
    unknown = set(raw) - allowed - ignored
    if unknown:
        raise CliError(f"config file {path}: unknown keys {sorted(unknown)}")

    def pick(section, cls):
        values = raw.get(section, {})
        known = {f.name for f in fields(cls)}
        bad = set(values) - known
        if bad:
            raise CliError(f"config file {path}: unknown {section} keys {sorted(bad)}")
        return values
    return pick("model_config", ModelConfig), pick("train_config", TrainConfig)


def _dataset_or_die(path):
    manifest, tensors = data.dataset_paths(path)
    for required in (manifest, tensors):
        if not os.path.exists(required):
            raise CliError(f"dataset file not found: {required}")
    return data.load_dataset(manifest, tensors)


def _build_configs(args, examples):
    model_section, train_section = _load_config_file(args.config)
    hidden_dim = examples[0].seq.shape[1] if examples else 0
    max_seq = max((ex.seq_len for ex in examples), default=1)

    model_config = ModelConfig(**model_section)
    model_config.hidden_dim = hidden_dim
    model_config.max_seq_len = max_seq
    flag_map = {
        "encoder": "encoder_kind", "decoder": "decoder_kind",
        "cheb_order": "cheb_order", "blocks": "num_blocks",
        "dropout": "dropout",
    }
    for flag, field_name in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(model_config, field_name, value)
    if getattr(args, "residual", False):
        model_config.residual = True

    train_config = TrainConfig(**train_section)
    for flag, field_name in (("lr", "lr"), ("l2", "l2_weight"),
                             ("batch_size", "batch_size"),
                             ("max_epochs", "max_epochs"),
                             ("heldout", "heldout_fraction"),
                             ("runs", "num_runs"), ("seed", "seed_base"),
                             ("dropout", "dropout")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(train_config, field_name, value)
    # seed precedence: flag > config file > STGNN_SEED env > 0
    if getattr(args, "seed", None) is None and "seed_base" not in train_section:
        train_config.seed_base = _default_seed()
    return model_config, train_config


# -- subcommands -----------------------------------------------------------------

def cmd_train(args) -> int:
    examples = _dataset_or_die(args.dataset)
    train_examples, test_examples = data.split_examples(examples)
    if not train_examples:
        raise CliError(f"dataset {args.dataset} has no training examples")
    model_config, train_config = _build_configs(args, examples)

    os.makedirs(args.out, exist_ok=True)
    report = training.fit_two_pass(
        train_examples, test_examples, model_config, train_config,
        checkpoint_dir=args.out, jobs=args.jobs)
    report.context = {"command": "train", "dataset": os.path.abspath(args.dataset)}

    report_path = os.path.join(args.out, "report.json")
    with open(report_path, "w", encoding="utf-8") as f:
        f.write(report.to_json())
        f.write("\n")
    table_path = os.path.join(args.out, "report.txt")
    with open(table_path, "w", encoding="utf-8") as f:
        f.write(report.to_table())
    print(report.to_table(), end="")
    print(f"report written to {report_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if not os.path.exists(args.checkpoint):
        raise CliError(f"checkpoint not found: {args.checkpoint}")
    examples = _dataset_or_die(args.dataset)
    model = load_checkpoint(args.checkpoint)

    width = examples[0].seq.shape[1] if examples else 0
    if width != model.config.hidden_dim:
        raise CliError(
            f"checkpoint hidden_dim {model.config.hidden_dim} does not match "
            f"dataset width {width}")

    _, test_examples = data.split_examples(examples)
    subset = test_examples
    if args.slice == "hard":
        subset = data.hard_slice(test_examples)
        if not subset:
            print("hard slice is empty for this dataset")
            return EXIT_OK
    accuracy, macro_f1 = training.evaluate(model, subset, args.batch_size)
    print(f"examples: {len(subset)}")
    print(f"accuracy: {accuracy:.6f}")
    print(f"macro_f1: {macro_f1:.6f}")
    if args.slice == "all":
        hard = data.hard_slice(test_examples)
        if hard:
            hard_acc, hard_f1 = training.evaluate(model, hard, args.batch_size)
            print(f"hard_accuracy: {hard_acc:.6f} ({len(hard)} examples)")
            print(f"hard_macro_f1: {hard_f1:.6f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    examples = data.synthesize(args.n, args.mode, args.h, args.seed,
                               flip=args.flip, test_fraction=args.test_fraction)
    manifest, tensors = data.write_dataset(examples, f"synthetic-{args.mode}",
                                           args.h, args.out)
    train_n = sum(1 for ex in examples if ex.split == "train")
    print(f"wrote {len(examples)} examples ({train_n} train) to {manifest} "
          f"and {tensors}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    ops = args.ops.split(",") if args.ops else None
    if args.inject_bad_grad:
        _inject_bad_gradient(args.inject_bad_grad)
    try:
        results = gradcheck.operation_suite(ops)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    failed = False
    for name, err in results.items():
        ok = err < gradcheck.TOLERANCE
        failed = failed or not ok
        print(f"{name:16s} max_rel_err={err:.3e} {'PASS' if ok else 'FAIL'}")
    return EXIT_INTERNAL if failed else EXIT_OK


def _inject_bad_gradient(op_name: str):
    """Test hook: corrupt one op's vector-Jacobian product by 5%."""
    from . import tensor as tensor_module
    original = getattr(tensor_module, op_name, None)
    if original is None:
        raise CliError(f"cannot inject bad gradient: no op named {op_name!r}")

    def corrupted(*op_args, **op_kwargs):
        out = original(*op_args, **op_kwargs)
        if out._vjp is not None:
            true_vjp = out._vjp
            out._vjp = lambda g: tuple(
                None if c is None else c * 1.05 for c in true_vjp(g))
        return out

    setattr(tensor_module, op_name, corrupted)


# -- argument parsing -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stgnn",
        description="Spectral-temporal graph network for aspect polarity")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run the two-pass training protocol")
    train.add_argument("--dataset", required=True,
                       help="directory with manifest.json and tensors.bin")
    train.add_argument("--encoder", choices=["gru", "lstm", "bilstm"])
    train.add_argument("--decoder", choices=["fc", "gru_fc", "lstm_fc"])
    train.add_argument("--cheb-order", dest="cheb_order", type=int)
    train.add_argument("--blocks", type=int)
    train.add_argument("--residual", action="store_true")
    train.add_argument("--dropout", type=float)
    train.add_argument("--lr", type=float)
    train.add_argument("--l2", type=float)
    train.add_argument("--batch-size", dest="batch_size", type=int)
    train.add_argument("--max-epochs", dest="max_epochs", type=int)
    train.add_argument("--heldout", type=float)
    train.add_argument("--runs", type=int)
    train.add_argument("--seed", type=int)
    train.add_argument("--out", default="stgnn-out")
    train.add_argument("--jobs", type=int, default=1)
    train.add_argument("--config", help="JSON config file (flags win)")
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("eval", help="score a checkpoint on a dataset")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--slice", choices=["all", "hard"], default="all")
    evaluate.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    evaluate.set_defaults(func=cmd_eval)

    synth = sub.add_parser("synth", help="emit a synthetic interchange dataset")
    synth.add_argument("--n", type=int, default=64)
    synth.add_argument("--mode", choices=["separable", "noisy"],
                       default="separable")
    synth.add_argument("--h", type=int, default=16)
    synth.add_argument("--flip", type=float, default=0.2,
                       help="label flip fraction in noisy mode")
    synth.add_argument("--test-fraction", dest="test_fraction", type=float,
                       default=0.25)
    synth.add_argument("--seed", type=int, default=_default_seed())
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=cmd_synth)

    check = sub.add_parser("gradcheck",
                           help="finite-difference check of every operation")
    check.add_argument("--ops", help="comma-separated subset of ops")
    check.add_argument("--inject-bad-grad", dest="inject_bad_grad",
                       help=argparse.SUPPRESS)
    check.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, StgnnError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except Exception as exc:  # noqa: BLE001 - report, then fail with code 1
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
