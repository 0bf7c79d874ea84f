"""Command line interface for the experiment harness.

Subcommands mirror the harness entry points:

    uwofdm mse-sweep   --systems uw_systematic,cp_ofdm --epsilons 0:0.2:11 ...
    uwofdm ber-sweep   --ebn0 0:40:11 --rate 0.5 --constellation qam16 ...
    uwofdm calibrate   --system uw_systematic --channel-seed 3
    uwofdm model-check --epsilons 0.05,0.1 --channels 10
    uwofdm plot        --csv out/ber.csv --kind ber_sweep

Every sweep writes a CSV into --out; plots are written next to it.  The exit
code of model-check is nonzero if any model ratio falls outside its window.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import errmodel, harness
from .channel import draw_channel, flat_channel
from .config import build_selection_matrices, load_config
from .rxfront import TIERS


def _parse_floats(text: str) -> tuple[float, ...]:
    """Either comma-separated values or start:stop:count."""
    if ":" in text:
        start, stop, count = text.split(":")
        return tuple(float(x) for x in np.linspace(float(start), float(stop), int(count)))
    return tuple(float(x) for x in text.split(","))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--systems", default="uw_systematic,cp_ofdm",
                   help="comma list from: " + ",".join(harness.SYSTEM_NAMES))
    p.add_argument("--tiers", default="cpe", help="comma list from: " + ",".join(TIERS))
    p.add_argument("--epsilons", default="0.1", help="comma list or start:stop:count")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--trials", type=int, default=None,
                   help="channel realizations (ber/model-check) or packets (mse)")
    p.add_argument("--uw", default=harness.UW_ZERO, choices=(harness.UW_ZERO, harness.UW_BARKER))
    p.add_argument("--tau-rms", type=float, default=harness.TAU_RMS_DEFAULT,
                   help="RMS delay spread in seconds; 0 = flat channel")
    p.add_argument("--workers", type=int, default=1,
                   help="worker processes (results are independent of this)")
    p.add_argument("--full-scale", action="store_true",
                   help="paper-scale trial counts (1e4 channels) instead of desk scale")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--config", default=None,
                   help="JSON SystemConfig replacing the matching-variant preset")


def _spec_from_args(args, kind: str) -> harness.ExperimentSpec:
    cfg_override = load_config(args.config) if args.config else None
    n_channels = args.trials if args.trials else (10_000 if args.full_scale else 300)
    n_packets = args.trials if args.trials else 200
    return harness.ExperimentSpec(
        kind=kind,
        systems=tuple(args.systems.split(",")),
        tiers=tuple(args.tiers.split(",")),
        epsilon_list=_parse_floats(args.epsilons),
        ebn0_list_db=_parse_floats(args.ebn0) if getattr(args, "ebn0", None) else (),
        rate={"1/2": 0.5, "3/4": 0.75, "uncoded": None}[getattr(args, "rate", "uncoded")],
        constellation=getattr(args, "constellation", "qpsk"),
        n_channels=n_channels,
        n_packets=n_packets,
        base_seed=args.seed,
        uw=args.uw,
        tau_rms=args.tau_rms,
        workers=args.workers,
        config_override=cfg_override,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="uwofdm", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_mse = sub.add_parser("mse-sweep", help="BMSE versus CFO (noise-free)")
    _add_common(p_mse)

    p_ber = sub.add_parser("ber-sweep", help="BER versus Eb/N0")
    _add_common(p_ber)
    p_ber.add_argument("--ebn0", default="0:40:11", help="dB list or start:stop:count")
    p_ber.add_argument("--rate", default="uncoded", choices=("uncoded", "1/2", "3/4"))
    p_ber.add_argument("--constellation", default="qpsk", choices=("qpsk", "qam16"))

    p_cal = sub.add_parser("calibrate", help="offset-slope calibration (m_d, m_p)")
    _add_common(p_cal)
    p_cal.add_argument("--channel-seed", type=int, default=None,
                       help="seed for one multipath realization; default flat channel")

    p_chk = sub.add_parser("model-check", help="Monte-Carlo validation of the error model")
    _add_common(p_chk)

    p_plot = sub.add_parser("plot", help="plot a previously written CSV")
    p_plot.add_argument("--csv", required=True)
    p_plot.add_argument("--kind", required=True, choices=("mse_sweep", "ber_sweep"))
    p_plot.add_argument("--out", default=None, help="output file (default: csv path with .pdf)")

    args = parser.parse_args(argv)

    if args.command == "plot":
        table = harness.ResultTable.read_csv(args.csv)
        out = args.out or os.path.splitext(args.csv)[0] + ".pdf"
        harness.emit_plots(table, out, args.kind)
        print(f"wrote {out}")
        return 0

    os.makedirs(args.out, exist_ok=True)

    if args.command == "mse-sweep":
        spec = _spec_from_args(args, "mse_sweep")
        table = harness.run_mse_sweep(spec)
        csv_path = os.path.join(args.out, "mse_sweep.csv")
        table.write_csv(csv_path)
        harness.emit_plots(table, os.path.join(args.out, "mse_sweep.pdf"), "mse_sweep")
        print(f"wrote {csv_path}")
        return 0

    if args.command == "ber-sweep":
        spec = _spec_from_args(args, "ber_sweep")
        table = harness.run_ber_sweep(spec)
        csv_path = os.path.join(args.out, "ber_sweep.csv")
        table.write_csv(csv_path)
        harness.emit_plots(table, os.path.join(args.out, "ber_sweep.pdf"), "ber_sweep")
        print(f"wrote {csv_path}")
        return 0

    if args.command == "calibrate":
        spec = _spec_from_args(args, "calibrate")
        rows = harness.ResultTable(("system", "channel_seed", "m_d", "m_p", "b_d", "b_p"))
        for name in spec.systems:
            system = harness.build_link_system(name, spec.uw)
            sel = build_selection_matrices(system.cfg)
            if args.channel_seed is None or spec.tau_rms == 0.0:
                ch, seed = flat_channel(system.cfg, sel), -1
            else:
                seed = args.channel_seed
                ch = draw_channel(system.cfg, sel, spec.tau_rms, seed)
            cal = errmodel.calibrate_offset_slopes(
                system.cfg, sel, system.gens, ch, system.pilots,
                uw_freq_down=system.uw_freq_down)
            rows.append(system=name, channel_seed=seed, m_d=cal.m_d, m_p=cal.m_p,
                        b_d=cal.b_d, b_p=cal.b_p)
            errmodel.save_calibration(
                os.path.join(args.out, f"calibration_{name}.json"), cal,
                meta={"system": name, "channel_seed": seed, "uw": spec.uw})
        csv_path = os.path.join(args.out, "calibration.csv")
        rows.write_csv(csv_path)
        print(f"wrote {csv_path}")
        return 0

    if args.command == "model-check":
        spec = _spec_from_args(args, "model_check")
        # --trials counts channel realizations; packets per channel stay fixed
        spec = _replace_counts(spec, n_channels=args.trials if args.trials else 10,
                               n_packets=40)
        table = harness.run_model_check(spec)
        csv_path = os.path.join(args.out, "model_check.csv")
        table.write_csv(csv_path)
        failures = [r for r in table.rows if not r["ok"]]
        for r in table.rows:
            status = "pass" if r["ok"] else "FAIL"
            print(f"{status} {r['system']} eps={r['epsilon']:g} ch={r['channel_seed']} "
                  f"{r['metric']}: ratio {r['ratio']:.3f}")
        print(f"wrote {csv_path}")
        return 1 if failures else 0

    return 2


def _replace_counts(spec: harness.ExperimentSpec, **kwargs) -> harness.ExperimentSpec:
    from dataclasses import replace

    return replace(spec, **kwargs)


if __name__ == "__main__":
    sys.exit(main())
