"""spanlm command line: train a checkpoint, serve it as a scorer."""

import argparse
import logging
import sys

from spanlm.serve import serve
from spanlm.train import TrainConfig, train


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(prog="spanlm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune on span-masked instance files")
    p.add_argument("--instances", action="append", required=True, help="instance JSONL file (repeatable)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--preset", default="tiny", choices=("tiny", "small"))
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-seq", type=int, default=256)
    p.add_argument("--task-filter", default=None, help="comma-separated task ids to train on")

    p = sub.add_parser("serve", help="speak the scorer protocol on stdin/stdout")
    p.add_argument("--checkpoint", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            tasks = None
            if args.task_filter:
                tasks = tuple(t.strip() for t in args.task_filter.split(",") if t.strip())
            cfg = TrainConfig(
                instances=tuple(args.instances),
                out_dir=args.out_dir,
                preset=args.preset,
                epochs=args.epochs,
                batch_size=args.batch_size,
                lr=args.lr,
                seed=args.seed,
                max_seq=args.max_seq,
                tasks=tasks,
            )
            print(train(cfg))
        else:
            serve(args.checkpoint)
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
