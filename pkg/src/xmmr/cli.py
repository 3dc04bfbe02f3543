"""Command-line entry point: ``xmmr <subcommand> [options] [--section.key value ...]``."""
import argparse
import logging
import sys

from . import pipeline as pl
from . import retrieval as rt
from .io_formats import DataError
from .nd_core import ShapeError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for data errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _override_options():
    parent = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    group = parent.add_argument_group("config overrides (any key of the config file)")
    for key, default in pl.DEFAULTS.items():
        shown = pl.format_config({key: default})[key]
        group.add_argument(f"--{key}", dest=key, metavar="V", help=f"default: {shown}")
    return parent


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat 'section.key = value' file")
    common.add_argument("-v", "--verbose", action="store_true")
    overrides = _override_options()
    parents = [common, overrides]

    p = _Parser(prog="xmmr", description="Cross-modal retrieval with deep metric learning.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synthgen", parents=parents, help="write the synthetic benchmark")
    s.add_argument("--out", required=True, help="output directory")

    def staged(name, help_, data=True):
        sp = sub.add_parser(name, parents=parents, help=help_)
        if data:
            sp.add_argument("--data", required=True, help="dataset manifest")
        sp.add_argument("--workdir", default=".", help="directory for stage artifacts")
        return sp

    staged("pretrain", "train the base network and write shallow representations")
    staged("train", "train the metric network on the shallow representations")
    staged("embed", "write final embeddings for every row", data=False)
    ev = staged("evaluate", "MAP of the test split")
    ev.add_argument("--q-img", help="image embeddings (default: workdir/q_img.txt)")
    ev.add_argument("--q-txt", help="text embeddings (default: workdir/q_txt.txt)")
    ab = staged("ablate", "base / semi_only / quad_only / full comparison")
    ab.add_argument("--modes", default="base,semi_only,quad_only,full")
    return p


def _overrides(ns):
    return {k: v for k, v in vars(ns).items() if k in pl.DEFAULTS}


def _run(ns, out):
    cfg = pl.load_config(ns.config, _overrides(ns))
    cmd = ns.command
    if cmd == "synthgen":
        path = pl.run_synthgen(cfg, ns.out)
        print(f"wrote {path}", file=out)
    elif cmd == "pretrain":
        _, S_img, _ = pl.run_pretrain(cfg, ns.data, ns.workdir)
        print(f"shallow representations: {S_img.shape[0]} rows x {S_img.shape[1]} cols", file=out)
    elif cmd == "train":
        state, report = pl.run_train(cfg, ns.data, ns.workdir)
        last = report.total[-1] if report.total else float("nan")
        print(f"{report.final_step} steps in {report.wall_clock:.1f}s, final total loss {last:.6g}",
              file=out)
        print(f"checkpoint {report.checkpoint_path}", file=out)
    elif cmd == "embed":
        Q_img, _ = pl.run_embed(cfg, ns.workdir)
        print(f"embeddings: {Q_img.shape[0]} rows x {Q_img.shape[1]} cols", file=out)
    elif cmd == "evaluate":
        reports = pl.run_evaluate(cfg, ns.data, ns.workdir, ns.q_img, ns.q_txt)
        out.write(rt.format_reports(reports))
    elif cmd == "ablate":
        modes = tuple(m.strip() for m in ns.modes.split(",") if m.strip())
        bad = [m for m in modes if m not in pl.tr.MODES]
        if bad:
            raise UsageError(f"unknown ablation mode(s) {bad}")
        rows = pl.run_ablate(cfg, ns.data, ns.workdir, modes)
        print(pl.format_ablation(rows), file=out)


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        _run(ns, out)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except pl.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ShapeError, rt.ZeroNormError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except pl.tr.DegenerateDataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, OverflowError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
