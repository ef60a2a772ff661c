"""One runner per CLI subcommand: config in, tables and a flat summary out.

Runners take the point seed explicitly, so a direct run and point 0 of a
sweep coincide. Nothing here touches the filesystem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import cavity, decoherence as dc, dynamics as dyn, photon_stats as ps, spin
from .config import ExperimentConfig
from .io import Table


@dataclass
class Result:
    figure: str
    tables: dict
    summary: dict = field(default_factory=dict)


def run_purcell(cfg: ExperimentConfig, seed: int) -> Result:
    cfg.require("cavity", "emitter")
    em, cav = cfg.emitter.params(), cfg.cavity.params()
    e = cfg.emitter
    g = cavity.single_photon_coupling(em, cav)
    res = cavity.purcell_enhancement(g, cav, em)
    eta_lt = cavity.eta_from_lifetimes(e.t1_cav_us, e.t1_bulk_us)
    summary = {
        "g_2pi": g / (2 * math.pi),
        "eta": res.eta,
        "purcell_factor": res.purcell_factor,
        "t1_cav": res.t1_cav,
        "p_cav": res.p_cav,
        "beta_cav": res.beta_cav,
        "eta_from_lifetimes": eta_lt,
        "p_cav_from_lifetimes": cavity.emission_fraction(eta_lt),
        "beta_cav_from_lifetimes": cavity.cavity_branching_ratio(em.beta_parallel, e.t1_cav_branching_us,
                                                                 e.t1_bulk_us),
        "beta_parallel_from_rates": em.beta_parallel,
        "beta_parallel_from_effective": cavity.branching_from_effective(e.beta_eff, e.p_exc),
    }
    units = {"g_2pi": "Hz", "t1_cav": "s"}
    return Result("cavity-QED report (no figure)", {"report": Table.from_mapping(summary, units)}, summary)


def _readout_level_model(r) -> dyn.LevelModel:
    # p_exc = 1 maps the photon-stats parameters onto the level model exactly
    return dyn.LevelModel(beta_a=1 - r.p_f, eta_det=r.p_tot, gamma_bg=r.gamma_bg, aux_leak=0.0,
                          t1_qubit=math.inf, t1_aux=math.inf)


def run_ssro(cfg: ExperimentConfig, seed: int) -> Result:
    cfg.require("readout")
    r = cfg.readout
    model = r.model()
    d0 = ps.background_distribution(model)
    d1 = ps.bright_distribution(model, r.truncation)
    rep = ps.assignment_errors(d0, d1, r.n_c)
    cond = ps.conditional_fidelity(rep.f_0, rep.f_1)

    lm = _readout_level_model(r)
    seq = dyn.readout_sequence(r.n_pulses, p_exc=1.0, window=r.t_r_us * 1e-6)
    shots, workers = cfg.run.shots, cfg.run.workers
    c0 = dyn.simulate_sequence(lm, seq, shots, seed, initial="0g", workers=workers, key=(1, 0)).total_counts()
    c1 = dyn.simulate_sequence(lm, seq, shots, seed, initial="1g", workers=workers, key=(1, 1)).total_counts()
    n = max(d0.pmf.size, d1.pmf.size, int(c0.max()) + 1, int(c1.max()) + 1)
    h0 = np.bincount(c0, minlength=n) / shots
    h1 = np.bincount(c1, minlength=n) / shots
    mc = ps.assignment_errors(ps.CountDistribution(h0), ps.CountDistribution(h1), r.n_c)

    sweep = ps.readout_sweep(model, r.sweep_pulses, r.n_c, r.truncation)
    summary = {"n_pulses": r.n_pulses, "n_c": r.n_c, "f_0": rep.f_0, "f_1": rep.f_1, "f_avg": rep.f_avg,
               "f_cond": cond.f_cond, "p_success": cond.p_success,
               "f_0_mc": mc.f_0, "f_1_mc": mc.f_1, "f_avg_mc": mc.f_avg}
    tables = {
        "histogram": Table({"counts": np.arange(n), "p_dark": d0.padded(n), "p_bright": d1.padded(n),
                            "mc_dark": h0, "mc_bright": h1}),
        "fidelity_vs_pulses": Table(dict(sweep)),
        "summary": Table.from_mapping(summary),
    }
    return Result("Fig. 4B histograms; Fig. S13 fidelity vs pulse number", tables, summary)


def _g2_schedules(cfg):
    p = cfg.sequences.p_exc
    init = dyn.Pulse("optical-C", dyn.PULSE_PERIOD, p_exc=p)
    read = dyn.readout_pulse(p_exc=p)
    return dyn.G2Schedule(read, init), dyn.G2Schedule(read, None)


def run_g2(cfg: ExperimentConfig, seed: int) -> Result:
    cfg.require("levels", "sequences")
    m, s = cfg.levels.model(), cfg.sequences
    cols, summary = {}, {}
    for tag, sch in zip(("init", "no_init"), _g2_schedules(cfg)):
        mc = dyn.g2_pulsewise(m, sch, cfg.run.shots, seed, max_lag=s.g2_max_lag,
                              stream_length=s.g2_stream_length, workers=cfg.run.workers)
        ex = dyn.g2_exact(m, sch, s.g2_max_lag)
        cols["lag"] = mc.lags
        cols[f"g2_{tag}"], cols[f"stderr_{tag}"], cols[f"g2_exact_{tag}"] = mc.g2, mc.stderr, ex.g2
        summary.update({f"g2_zero_{tag}": mc.zero_lag, f"bunching_{tag}": mc.bunching_amplitude,
                        f"bunching_exact_{tag}": ex.bunching_amplitude})
    return Result("Fig. S4", {"g2": Table(cols), "summary": Table.from_mapping(summary)}, summary)


def run_init(cfg: ExperimentConfig, seed: int) -> Result:
    cfg.require("levels", "sequences")
    m, s = cfg.levels.model(), cfg.sequences
    kw = {"workers": cfg.run.workers}
    sub_mc, sub_ex = [], []
    for i, n_f in enumerate(s.init_f_scan):
        seq = dyn.init_sequence(n_f, s.init_a_pulses, p_exc=s.p_exc)
        rec = dyn.simulate_sequence(m, seq, cfg.run.shots, seed, key=(1, 10, i), **kw)
        sub_mc.append(dyn.subspace_fidelity(rec.populations[-1])["subspace"])
        sub_ex.append(dyn.subspace_fidelity(dyn.propagate(m, seq)[-1])["subspace"])
    rows = {"n_a": list(s.init_a_scan)}
    for j, target in enumerate(("0g", "1g")):
        mc, ex = [], []
        for i, n_a in enumerate(s.init_a_scan):
            seq = dyn.init_sequence(s.init_f_pulses, n_a, target=target, p_exc=s.p_exc)
            rec = dyn.simulate_sequence(m, seq, cfg.run.shots, seed, key=(1, 20 + j, i), **kw)
            mc.append(rec.populations[-1][dyn.G1])
            ex.append(dyn.propagate(m, seq)[-1][dyn.G1])
        rows[f"p1_prep_{target}"], rows[f"p1_prep_{target}_exact"] = mc, ex
    full = dyn.subspace_fidelity(dyn.propagate(m, dyn.init_sequence(s.init_f_pulses, s.init_a_pulses,
                                                                     p_exc=s.p_exc))[-1])
    summary = {"subspace_population": full["subspace"], "fidelity_0g": full["fidelity"]}
    tables = {"init_f_scan": Table({"n_f": list(s.init_f_scan), "subspace": sub_mc, "subspace_exact": sub_ex}),
              "init_a_scan": Table(rows), "summary": Table.from_mapping(summary)}
    return Result("Fig. S6", tables, summary)


def run_t1(cfg: ExperimentConfig, seed: int) -> Result:
    cfg.require("levels", "sequences")
    m = cfg.levels.model()
    waits = cfg.sequences.waits()
    c = dyn.spin_t1_curves(m, waits, cfg.run.shots, seed, workers=cfg.run.workers)
    exact = np.array([dyn.propagate(m, dyn.PulseSequence((dyn.Pulse("wait", float(t)),)), "0g")[-1]
                      for t in waits])
    tables = {"t1": Table({"wait": waits, "p0": c.p0, "p1": c.p1, "p_aux": c.populations[:, dyn.AUX],
                           "p0_exact": exact[:, dyn.G0], "p1_exact": exact[:, dyn.G1]},
                          units={"wait": "s"})}
    summary = {}
    if c.fit is not None:
        summary = {"t_fast": c.fit.t_fast, "t_slow": c.fit.t_slow, "ratio": c.fit.ratio,
                   "temperature": c.fit.temperature(m.qubit_frequency), "fit_rms": c.fit.rms}
    tables["summary"] = Table.from_mapping(summary, {"t_fast": "s", "t_slow": "s", "temperature": "K"})
    return Result("Fig. S14", tables, summary)


def run_odmr(cfg: ExperimentConfig, seed: int) -> Result:
    cfg.require("spin")
    sp = cfg.spin
    ground, _ = sp.systems()
    f0 = spin.zero_field_levels(ground).qubit_splitting
    edges = f0 + np.arange(-500e3, 500e3 + 1, 500.0)
    s = spin.odmr_spectrum(ground, sp.neighbor_list(), sp.broadening_hz, edges=edges)
    w = s.strengths / s.strengths.sum()
    mu = float(np.sum(w * s.frequencies))
    var = float(np.sum(w * (s.frequencies - mu) ** 2))
    skew = float(np.sum(w * (s.frequencies - mu) ** 3) / var**1.5) if var > 0 else 0.0
    summary = {"qubit_frequency": f0, "envelope_fwhm": s.envelope_fwhm(), "line_skewness": skew,
               "n_lines": int(s.frequencies.size), "total_strength": s.total_strength,
               "integral_plus_outside": s.integral() + s.outside_mass}
    order = np.argsort(s.frequencies, kind="stable")
    tables = {
        "odmr": Table({"offset": s.centers - f0, "intensity": s.intensity / s.intensity.max()},
                      units={"offset": "Hz", "intensity": "normalized"}),
        "lines": Table({"offset": s.frequencies[order] - f0, "strength": s.strengths[order]}, units={"offset": "Hz"}),
        "summary": Table.from_mapping(summary, {"qubit_frequency": "Hz", "envelope_fwhm": "Hz"}),
    }
    return Result("Fig. S8B", tables, summary)


def run_dd(cfg: ExperimentConfig, seed: int) -> Result:
    cfg.require("noise")
    nz = cfg.noise
    shots, workers = cfg.run.shots, cfg.run.workers
    ou = nz.noise(with_line=False)
    curves = {k: [] for k in ("sequence", "n_pi", "time", "w_quadrature", "w_mc", "stderr")}
    summary = {}
    for j, n in enumerate(nz.curve_n):
        kinds = ["hahn"] if n == 1 else ["cpmg"] + (["xy8"] if n % 8 == 0 else [])
        for kind in kinds:
            seq = dc.DDSequence(kind, n)
            t2 = dc.t2_from_psd(ou, seq, 4e-5)
            times = np.linspace(0.05, 2.5, nz.curve_points) * t2
            quad = dc.coherence_from_psd(ou, seq, times)
            mc = dc.mc_coherence(ou, seq, times, shots, seed=seed, workers=workers)
            curves["sequence"] += [kind] * times.size
            curves["n_pi"] += [n] * times.size
            curves["time"] += list(times)
            curves["w_quadrature"] += list(quad)
            curves["w_mc"] += list(mc.w)
            curves["stderr"] += list(mc.stderr)
            summary[f"t2_{kind}_{n}"] = t2
    scaling = {"exponent": [], "n_pi": [], "t2": []}
    for gamma in nz.scaling_exponents:
        noise = dc.NoiseModel([dc.PowerLawNoise(1.0, gamma)])
        rows = [(n, dc.t2_from_psd(noise, n, 1.0)) for n in nz.scaling_n]
        for n, t2 in rows:
            scaling["exponent"].append(gamma)
            scaling["n_pi"].append(n)
            scaling["t2"].append(t2)
        summary[f"scaling_{gamma:g}"] = dc.scaling_exponent(rows).exponent
    spacing = np.linspace(nz.spacing_min_us, nz.spacing_max_us, nz.spacing_points) * 1e-6
    seq = dc.DDSequence.cpmg(nz.revival_n)
    rev = dc.mc_coherence(nz.noise(), seq, nz.revival_n * spacing, max(shots // 10, 1000), seed=seed,
                          workers=workers)
    summary["revival_period"] = dc.revival_period(spacing, rev.w)
    summary["collapses"] = int(dc.find_collapses(spacing, rev.w).size)
    tables = {
        "coherence": Table(curves, units={"time": "s"}),
        "scaling": Table(scaling, units={"t2": "s (amplitude 1 rad^2/s)"}),
        "revivals": Table({"spacing": spacing, "w_mc": rev.w, "stderr": rev.stderr}, units={"spacing": "s"},
                          notes=("CPMG pulse spacing 2 tau; OU bath plus narrowband line",)),
        "summary": Table.from_mapping(summary),
    }
    return Result("Figs. S10-S12 with scaling fit", tables, summary)


def run_ramsey_ps(cfg: ExperimentConfig, seed: int) -> Result:
    cfg.require("postselection")
    p = cfg.postselection
    rows = dc.postselected_ramsey(p.model(), p.n_c, cfg.run.shots, seed)
    table = Table({"n_c": [r.n_c for r in rows], "t2_star": [r.t2_star for r in rows],
                   "discard_fraction": [r.discard_fraction for r in rows], "kept": [r.kept for r in rows]},
                  units={"t2_star": "s"})
    summary = {f"t2_star_nc{r.n_c}": r.t2_star for r in rows}
    summary.update({f"discard_nc{r.n_c}": r.discard_fraction for r in rows})
    return Result("Fig. S7 table", {"postselection": table}, summary)


RUNNERS = {
    "purcell": run_purcell,
    "ssro": run_ssro,
    "g2": run_g2,
    "init": run_init,
    "t1": run_t1,
    "odmr": run_odmr,
    "dd": run_dd,
    "ramsey-ps": run_ramsey_ps,
}
STOCHASTIC = ("ssro", "g2", "init", "t1", "dd", "ramsey-ps")
