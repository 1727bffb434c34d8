"""Command-line front end: synth, model-accuracy, estimate, contours, report."""

import sys

import click

from . import kernels
from .evaluation import (
    EvalConfig,
    SynthConfig,
    run_contours,
    run_estimate,
    run_model_accuracy,
    run_report,
    run_synth,
)


def _parse_range(text, cast=float):
    parts = str(text).split(":")
    if len(parts) == 1:
        v = cast(parts[0])
        return (v, v)
    return (cast(parts[0]), cast(parts[1]))


@click.group()
@click.version_option(package_name="ppa")
def main():
    """Perspective phase angle (PPA) evaluation suite.

    PPA_NUM_THREADS caps parallelism; PPA_BACKEND selects the compute
    backend (native/numpy).
    """


@main.command()
@click.option("--out", required=True, type=click.Path(), help="Dataset directory.")
@click.option("--views", default=282, show_default=True, help="Number of camera poses.")
@click.option("--width", default=640, show_default=True)
@click.option("--height", default=480, show_default=True)
@click.option("--fov-deg", default=86.6, show_default=True, help="Horizontal field of view.")
@click.option("--distance-mm", default="400:700", show_default=True,
              help="Camera distance range MIN:MAX in mm.")
@click.option("--polar-deg", default="10:50", show_default=True,
              help="Camera polar-angle range MIN:MAX from the board normal.")
@click.option("--board-mm", default="400x300", show_default=True,
              help="Board size WxH in mm.")
@click.option("--dolp-mode", type=click.Choice(["specular", "constant"]),
              default="specular", show_default=True)
@click.option("--dolp-constant", default=0.4, show_default=True)
@click.option("--ior", default=1.5, show_default=True, help="Refractive index.")
@click.option("--aolp-shift", type=click.Choice(["auto", "0", "half-pi"]),
              default="auto", show_default=True,
              help="Phase offset between polarization direction and PoI.")
@click.option("--noise-intensity", default=0.0, show_default=True,
              help="Gaussian intensity noise as a fraction of I_avg.")
@click.option("--noise-aolp-deg", default=0.0, show_default=True,
              help="Gaussian AoLP noise applied when rendering, degrees.")
@click.option("--seed", default=7, show_default=True)
@click.option("--images/--no-images", "write_images", default=True,
              help="Write 16-bit intensity PNGs.")
@click.option("--maps/--no-maps", "write_maps", default=True,
              help="Write ground-truth PFM maps.")
def synth(out, views, width, height, fov_deg, distance_mm, polar_deg, board_mm,
          dolp_mode, dolp_constant, ior, aolp_shift, noise_intensity,
          noise_aolp_deg, seed, write_images, write_maps):
    """Render a synthetic polarization dataset."""
    import math

    shift = {"auto": None, "0": 0.0, "half-pi": math.pi / 2}[aolp_shift]
    bw, bh = (float(x) for x in board_mm.lower().split("x"))
    cfg = SynthConfig(
        out=out, views=views, width=width, height=height, fov_deg=fov_deg,
        distance_mm=_parse_range(distance_mm), polar_deg=_parse_range(polar_deg),
        board_mm=(bw, bh), dolp_mode=dolp_mode, dolp_constant=dolp_constant,
        refractive_index=ior, aolp_shift=shift, noise_intensity=noise_intensity,
        noise_aolp_deg=noise_aolp_deg, seed=seed, write_images=write_images,
        write_maps=write_maps,
    )
    manifest = run_synth(cfg)
    click.echo(f"wrote {manifest['views']} views to {out} "
               f"(config {manifest['config_hash']}, backend {kernels.active_name()})")


def _eval_options(fn):
    for deco in reversed([
        click.option("--dataset", required=True, type=click.Path(exists=True)),
        click.option("--out", required=True, type=click.Path()),
        click.option("--model", type=click.Choice(["opa", "ppa", "both"]),
                     default="both", show_default=True),
        click.option("--dolp-threshold", default=0.1, show_default=True),
        click.option("--blur-sigma", default=1.0, show_default=True),
        click.option("--noise-aolp-deg", default=0.0, show_default=True,
                     help="AoLP noise added at evaluation time, degrees."),
        click.option("--seed", default=0, show_default=True),
        click.option("--source", type=click.Choice(
            ["auto", "model", "render", "maps", "images"]),
            default="auto", show_default=True,
            help="Where phase angles come from (synthetic geometry, stored "
                 "maps, or re-extraction from images)."),
    ]):
        fn = deco(fn)
    return fn


@main.command("model-accuracy")
@_eval_options
@click.option("--dump-maps/--no-dump-maps", default=False,
              help="Write per-view predicted/extracted phase maps as PFM.")
def model_accuracy(dataset, out, model, dolp_threshold, blur_sigma,
                   noise_aolp_deg, seed, source, dump_maps):
    """Per-pixel phase-angle accuracy of the forward models."""
    cfg = EvalConfig(dataset=dataset, out=out, model=model,
                     dolp_threshold=dolp_threshold, blur_sigma=blur_sigma,
                     noise_aolp_deg=noise_aolp_deg, seed=seed, source=source,
                     dump_maps=dump_maps)
    payload = run_model_accuracy(cfg)
    for m in ("opa", "ppa"):
        if m in payload["summary"]:
            s = payload["summary"][m]
            click.echo(f"{m}: mean {s['mean_deg']:+.4f} deg, "
                       f"rmse {s['rmse_deg']:.4f} deg over {s['pixels']} pixels")


@main.command()
@_eval_options
@click.option("--mode", type=click.Choice(["single", "multi"]), default="multi",
              show_default=True)
@click.option("--views", "-k", default=3, show_default=True,
              help="Views per estimate (multi mode).")
@click.option("--trials", default=1000, show_default=True)
@click.option("--pixels", default=100000, show_default=True,
              help="Pixels per estimate (single mode).")
@click.option("--sweep", default="", help="View-count sweep LO:HI (multi mode).")
def estimate(dataset, out, model, dolp_threshold, blur_sigma, noise_aolp_deg,
             seed, source, mode, views, trials, pixels, sweep):
    """Single- or multi-view surface-normal estimation benchmarks."""
    cfg = EvalConfig(dataset=dataset, out=out, model=model,
                     dolp_threshold=dolp_threshold, blur_sigma=blur_sigma,
                     noise_aolp_deg=noise_aolp_deg, seed=seed, source=source,
                     mode=mode, views=views, trials=trials, pixels=pixels,
                     sweep=sweep)
    payload = run_estimate(cfg)
    for m in ("opa", "ppa"):
        if m in payload["summary"] and payload["summary"][m].get("count"):
            s = payload["summary"][m]
            click.echo(f"{m}: median {s['median_deg']:.3f} deg, "
                       f"frac<25deg {s['frac_below_25deg']:.3f} "
                       f"({s['count']} ok, {s['ill_conditioned']} ill-conditioned)")


@main.command()
@_eval_options
@click.option("--step", default=0.5, show_default=True, help="Propagation step, px.")
@click.option("--max-steps", default=4000, show_default=True)
@click.option("--num-seeds", default=20, show_default=True)
@click.option("--view-pair", default="0:1", show_default=True)
def contours(dataset, out, model, dolp_threshold, blur_sigma, noise_aolp_deg,
             seed, source, step, max_steps, num_seeds, view_pair):
    """Iso-depth vs perspective contour comparison."""
    pair = tuple(int(x) for x in view_pair.split(":"))
    cfg = EvalConfig(dataset=dataset, out=out, model=model,
                     dolp_threshold=dolp_threshold, blur_sigma=blur_sigma,
                     noise_aolp_deg=noise_aolp_deg, seed=seed, source=source,
                     step=step, max_steps=max_steps, num_seeds=num_seeds,
                     view_pair=pair)
    payload = run_contours(cfg)
    s = payload["summary"]
    click.echo(f"iso-depth rmse {s['rmse_iso_depth_mm']:.4f} mm, "
               f"ppa rmse {s['rmse_ppa_mm']:.6f} mm, "
               f"ratio {s['rmse_ratio_ppa_over_iso']:.4f}")


@main.command()
@click.argument("inputs", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def report(inputs, out):
    """Merge report files; exit nonzero unless every embedded check passes."""
    merged, all_pass = run_report(inputs, out)
    s = merged["summary"]
    click.echo(f"{s['checks_passed']}/{s['checks_total']} checks passed "
               f"({s['checks_skipped']} skipped)")
    if not all_pass:
        sys.exit(1)


if __name__ == "__main__":
    main()
