"""Experiment pipelines: config -> link objects -> curves -> CSV files."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import __version__
from ..analytic import (
    NumericalFailure,
    ParameterRegimeError,
    e2e_op,
    hybrid_link_op,
    uwoc_direct_op,
    uwoc_oris_op,
)
from ..channels import (
    FsoLinkParams,
    PointingErrorParams,
    RfRisLinkParams,
    UwocDirectLinkParams,
    UwocOrisLinkParams,
    db_to_linear,
    gg_params_from_rytov,
)
from ..drl.env import AgentConfig
from ..drl.training import (
    ARMS,
    evaluate_policy,
    load_checkpoint,
    save_checkpoint,
    train,
    write_training_log,
)
from ..montecarlo import McConfig, estimate_e2e_op_grids, estimate_fso_rf_op_grid, estimate_uwoc_op_grid
from .config import ExperimentConfig

CSV_COLUMNS = ("x", "series", "y", "y_se")


class ExperimentError(RuntimeError):
    """A pipeline failed; the message names the experiment and series."""


@dataclass
class CurveArtifact:
    """One figure's data: rows of (x, series, y, y_se) plus labels."""

    name: str
    figure: str
    x_label: str
    y_label: str
    log_y: bool
    rows: list[tuple[float, str, float, float]] = field(default_factory=list)

    def add_series(self, series: str, xs, ys, ses=None):
        ses = [0.0] * len(xs) if ses is None else ses
        for x, y, se in zip(xs, ys, ses):
            self.rows.append((float(x), series, float(y), float(se)))

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: (r[1], r[0]))

    def series(self) -> list[str]:
        return sorted({r[1] for r in self.rows})

    def column(self, series: str):
        rows = [r for r in self.sorted_rows() if r[1] == series]
        return np.array([r[0] for r in rows]), np.array([r[2] for r in rows]), np.array([r[3] for r in rows])

    def to_csv(self, cfg: ExperimentConfig) -> str:
        buf = io.StringIO()
        buf.write(f"# artifact: {self.name}\n")
        buf.write(f"# figure: {self.figure}\n")
        buf.write(f"# config_sha256: {cfg.digest()}\n")
        buf.write(f"# seed: {cfg.seed}\n")
        buf.write(f"# code_version: {__version__}\n")
        buf.write(f"# x: {self.x_label}\n")
        buf.write(f"# y: {self.y_label}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for x, s, y, se in self.sorted_rows():
            w.writerow([repr(x), s, repr(y), repr(se)])
        return buf.getvalue()


def read_csv_provenance(path) -> dict:
    meta = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
    return meta


# ---------------------------------------------------------------------------
# Builders (dB -> linear happens here and only here)


def snr_grid_db(cfg: ExperimentConfig, section: str) -> np.ndarray:
    return np.linspace(cfg[f"{section}.snr_start_db"], cfg[f"{section}.snr_stop_db"], cfg[f"{section}.points"])


def mc_config(cfg: ExperimentConfig) -> McConfig:
    return McConfig(cfg.n_trials(), cfg.seed, cfg["mc.n_workers"], cfg["mc.batch_size"])


def fso_link(cfg: ExperimentConfig, threshold_db: float, distance_m: float | None = None,
             mean_snr_db: float = 0.0) -> FsoLinkParams:
    return FsoLinkParams(
        wavelength_m=cfg["fso.wavelength_nm"] * 1e-9,
        cn2=cfg["fso.cn2"],
        distance_m=cfg["fso.distance_m"] if distance_m is None else distance_m,
        mean_snr_linear=db_to_linear(mean_snr_db),
        switch_threshold_linear=db_to_linear(threshold_db),
    )


def rf_link(cfg: ExperimentConfig, n_elements: int, dist_sd_m=None, dist_sr_m=None, dist_rd_m=None) -> RfRisLinkParams:
    return RfRisLinkParams(
        n_elements=n_elements,
        gain_tx_db=cfg["rf.gain_tx_db"],
        gain_rx_db=cfg["rf.gain_rx_db"],
        dist_sd_m=cfg["rf.dist_sd_m"] if dist_sd_m is None else dist_sd_m,
        dist_sr_m=cfg["rf.dist_sr_m"] if dist_sr_m is None else dist_sr_m,
        dist_rd_m=cfg["rf.dist_rd_m"] if dist_rd_m is None else dist_rd_m,
        mean_snr_linear=db_to_linear(cfg["rf.mean_snr_db"]),
        outage_threshold_linear=db_to_linear(cfg["rf.threshold_db"]),
    )


def pointing(cfg: ExperimentConfig) -> PointingErrorParams:
    return PointingErrorParams(
        beam_waist_m=cfg["uwoc.beam_waist_m"],
        aperture_diameter_m=cfg["uwoc.aperture_m"],
        jitter_elev_rad=cfg["uwoc.jitter_elev_mrad"] * 1e-3,
        jitter_azim_rad=cfg["uwoc.jitter_azim_mrad"] * 1e-3,
    )


def uwoc_link(cfg: ExperimentConfig, n_elements: int, turbulence: str | None = None, mean_snr_db: float = 0.0,
              dist_sr_m=None, dist_rd_m=None) -> UwocOrisLinkParams:
    gg = gg_params_from_rytov(cfg["uwoc.turbulence_presets"][turbulence or cfg["uwoc.turbulence"]])
    return UwocOrisLinkParams(
        n_elements=n_elements,
        extinction_coeff_per_m=cfg["uwoc.extinction_per_m"],
        dist_sr_m=cfg["uwoc.dist_sr_m"] if dist_sr_m is None else dist_sr_m,
        dist_rd_m=cfg["uwoc.dist_rd_m"] if dist_rd_m is None else dist_rd_m,
        gg_sr=gg,
        gg_rd=gg,
        pointing=pointing(cfg),
        mean_snr_linear=db_to_linear(mean_snr_db),
        outage_threshold_linear=db_to_linear(cfg["uwoc.threshold_db"]),
        wavelength_m=cfg["uwoc.wavelength_nm"] * 1e-9,
    )


def direct_uwoc_link(cfg: ExperimentConfig, distance_m: float, mean_snr_db: float = 0.0) -> UwocDirectLinkParams:
    return UwocDirectLinkParams(
        extinction_coeff_per_m=cfg["uwoc.extinction_per_m"],
        distance_m=distance_m,
        gg=gg_params_from_rytov(cfg["uwoc.turbulence_presets"][cfg["uwoc.turbulence"]]),
        pointing=pointing(cfg),
        mean_snr_linear=db_to_linear(mean_snr_db),
        outage_threshold_linear=db_to_linear(cfg["uwoc.threshold_db"]),
        wavelength_m=cfg["uwoc.wavelength_nm"] * 1e-9,
    )


def agent_config(cfg: ExperimentConfig) -> AgentConfig:
    d = cfg["drl"]
    return AgentConfig(
        discount=d["discount"],
        polyak=d["polyak"],
        policy_delay=d["policy_delay"],
        explore_std=d["explore_std"],
        explore_clip=d["explore_clip"],
        target_noise_std=d["target_noise_std"],
        target_noise_clip=d["target_noise_clip"],
        actor_lr=d["actor_lr"],
        critic_lr=d["critic_lr"],
        batch_size=d["batch_size"],
        hidden=tuple(d["hidden"]),
        buffer_size=d["buffer_size"],
        bits=d["bits"],
        n_episodes=cfg.n_episodes(),
        steps_per_episode=d["steps_per_episode"],
        reward_weight=d["reward_weight"],
        phase_penalty=d["phase_penalty"],
        snr_threshold_linear=db_to_linear(d["snr_threshold_db"]),
        fbl_channel_uses=d["fbl_channel_uses"],
        fbl_info_bits=d["fbl_info_bits"],
        fbl_target_error=d["fbl_target_error"],
        csi_correlation=d["csi_correlation"],
        beta_min=d["beta_min"],
        amplitude_exponent=d["amplitude_exponent"],
        amplitude_offset=d["amplitude_offset_rad"],
    )


def drl_link(cfg: ExperimentConfig) -> UwocOrisLinkParams:
    return uwoc_link(cfg, cfg["drl.n_elements"], mean_snr_db=cfg["drl.train_snr_db"])


# ---------------------------------------------------------------------------
# Pipelines


def _guard(experiment: str, series: str, fn):
    try:
        return fn()
    except (NumericalFailure, ParameterRegimeError, FloatingPointError, ValueError) as exc:
        raise ExperimentError(f"{experiment}, series {series!r}: {exc}") from exc


def run_fig2(cfg: ExperimentConfig) -> list[CurveArtifact]:
    art = CurveArtifact("fig2_uwoc_op", "fig2", "mean SNR (dB)", "outage probability", True)
    xs = snr_grid_db(cfg, "fig2")
    mc = mc_config(cfg)
    for turb in cfg["fig2.turbulence"]:
        for n in cfg["uwoc.n_elements"]:
            link = uwoc_link(cfg, n, turb)
            label = f"N={n} {turb}"
            ys = _guard("fig2", label, lambda: [
                uwoc_oris_op(replace(link, mean_snr_linear=db_to_linear(x)), link.outage_threshold_linear)
                for x in xs])
            art.add_series(f"analytic {label}", xs, ys)
            if cfg["fig2.monte_carlo"]:
                est = estimate_uwoc_op_grid(link, "ideal", db_to_linear(xs), mc, tag=f"fig2/{turb}/{n}")
                art.add_series(f"mc {label}", xs, [e.outage_probability for e in est], [e.outage_se for e in est])
    return [art]


def run_fig4(cfg: ExperimentConfig) -> list[CurveArtifact]:
    art = CurveArtifact("fig4_hybrid_op", "fig4", "FSO mean SNR (dB)", "outage probability", True)
    xs = snr_grid_db(cfg, "fig4")
    mc = mc_config(cfg)
    for th in cfg["fso.thresholds_db"]:
        for n in cfg["rf.n_elements"]:
            rf = rf_link(cfg, n)
            label = f"N={n} th={th:g}dB"
            ys = _guard("fig4", label, lambda: [hybrid_link_op(fso_link(cfg, th, mean_snr_db=x), rf) for x in xs])
            art.add_series(f"analytic {label}", xs, ys)
            if cfg["fig4.monte_carlo"]:
                est = estimate_fso_rf_op_grid(fso_link(cfg, th), rf, db_to_linear(xs), mc, tag=f"fig4/{th}/{n}")
                art.add_series(f"mc {label}", xs, [e.outage_probability for e in est], [e.outage_se for e in est])
    return [art]


def _fig5_variants(cfg: ExperimentConfig):
    th = cfg["fso.thresholds_db"][0]
    fso = fso_link(cfg, th, distance_m=cfg["fig5.fso_distance_m"])
    yield "direct", fso, None, direct_uwoc_link(cfg, cfg["fig5.direct_uwoc_distance_m"])
    for n in cfg["fig5.n_elements"]:
        rf = rf_link(cfg, n, cfg["fig5.rf_dist_sd_m"], cfg["fig5.rf_dist_sr_m"], cfg["fig5.rf_dist_rd_m"])
        uw = uwoc_link(cfg, n, dist_sr_m=cfg["fig5.uwoc_dist_sr_m"], dist_rd_m=cfg["fig5.uwoc_dist_rd_m"])
        yield f"ris N={n}", fso, rf, uw


def run_fig5(cfg: ExperimentConfig) -> list[CurveArtifact]:
    """E2E outage; the grid sets the FSO mean SNR and, shifted by the
    configured offset, the underwater mean SNR. The RF mean SNR is fixed."""
    art = CurveArtifact("fig5_e2e_op", "fig5", "mean SNR (dB)", "end-to-end outage probability", True)
    xs = snr_grid_db(cfg, "fig5")
    offset = cfg["fig5.uwoc_snr_offset_db"]
    mc = mc_config(cfg)
    for label, fso, rf, uw in _fig5_variants(cfg):

        def analytic():
            out = []
            for x in xs:
                hop1 = hybrid_link_op(replace(fso, mean_snr_linear=db_to_linear(x)), rf)
                uw_x = replace(uw, mean_snr_linear=db_to_linear(x + offset))
                hop2 = uwoc_direct_op(uw_x) if isinstance(uw, UwocDirectLinkParams) else uwoc_oris_op(
                    uw_x, uw.outage_threshold_linear)
                out.append(float(e2e_op(hop1, hop2)))
            return out

        art.add_series(f"analytic {label}", xs, _guard("fig5", label, analytic))
        if cfg["fig5.monte_carlo"]:
            est = estimate_e2e_op_grids(fso, rf, uw, db_to_linear(xs), db_to_linear(xs + offset), mc)
            art.add_series(f"mc {label}", xs, [e.joint.outage_probability for e in est],
                           [e.joint.outage_se for e in est])
    return [art]


def _train(cfg: ExperimentConfig):
    return train(drl_link(cfg), agent_config(cfg), cfg.seed)


def run_train(cfg: ExperimentConfig, out_dir: Path | None = None) -> list[CurveArtifact]:
    res = _train(cfg)
    agent = agent_config(cfg)
    if out_dir is not None:
        write_training_log(out_dir / "training_log.csv", res.log)
        save_checkpoint(out_dir / "td3.npz", res.td3, agent)
        save_checkpoint(out_dir / "ddpg.npz", res.ddpg, agent)
    art = CurveArtifact("train_reward", "fig6", "episode", "average reward", False)
    steps = agent.steps_per_episode
    for ep, arm, mean, std in res.log:
        art.rows.append((float(ep), arm, mean, std / math.sqrt(steps)))
    return [art]


def trained_actors(cfg: ExperimentConfig):
    ckpt = cfg["evaluate.checkpoint_dir"]
    if ckpt:
        return load_checkpoint(Path(ckpt) / "td3.npz")[0], load_checkpoint(Path(ckpt) / "ddpg.npz")[0]
    res = _train(cfg)
    return res.td3, res.ddpg


def run_evaluate(cfg: ExperimentConfig) -> list[CurveArtifact]:
    td3, ddpg = trained_actors(cfg)
    link = drl_link(cfg)
    agent = agent_config(cfg)
    xs = snr_grid_db(cfg, "evaluate")
    mc = mc_config(cfg)
    op = CurveArtifact("eval_op", "fig7", "mean SNR (dB)", "outage probability", True)
    snr = CurveArtifact("eval_mean_snr", "fig7", "mean SNR (dB)", "average received SNR (linear)", True)
    cap = CurveArtifact("eval_capacity", "fig8", "mean SNR (dB)", "IM/DD capacity (bit/channel use)", False)
    for arm, policy in zip(ARMS, (td3, ddpg, "random")):
        est = evaluate_policy(policy, link, agent, db_to_linear(xs), mc)
        op.add_series(arm, xs, [e.outage_probability for e in est], [e.outage_se for e in est])
        snr.add_series(arm, xs, [e.mean_snr_linear for e in est], [e.mean_snr_se for e in est])
        cap.add_series(arm, xs, [e.capacity_bits_per_use for e in est], [e.capacity_se for e in est])
    return [op, snr, cap]


PIPELINES = {"fig2": run_fig2, "fig4": run_fig4, "fig5": run_fig5, "evaluate": run_evaluate}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> list[CurveArtifact]:
    """Run the configured experiment; with ``out_dir`` also write its files."""
    out = None if out_dir is None else Path(out_dir)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    if cfg.experiment == "train":
        arts = run_train(cfg, out)
    else:
        arts = PIPELINES[cfg.experiment](cfg)
    if out is not None:
        write_artifacts(arts, cfg, out)
    return arts


def write_artifacts(arts, cfg: ExperimentConfig, out_dir: Path):
    from .plotting import emit_plot_script

    (out_dir / "config.toml").write_text(cfg.dumps(), encoding="utf-8")
    for art in arts:
        (out_dir / f"{art.name}.csv").write_text(art.to_csv(cfg), encoding="utf-8")
    (out_dir / "plot.gp").write_text(emit_plot_script(arts), encoding="utf-8")
