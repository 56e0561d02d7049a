//! Executes a validated plan, writing artifacts as they become available.

use std::fmt::Write as _;

use entropy_lab::control::{evolve_feedback, evolve_modulated_recorded, feedback_control};
use entropy_lab::entropy_production::production_decomposition;
use entropy_lab::fokker_planck::export::{summary_csv, trajectory_csv};
use entropy_lab::fokker_planck::{evolve_recorded, DensityTrajectory, DriftSpec};
use entropy_lab::model::io::fmt_f64;
use entropy_lab::model::{relative_entropy, VectorFieldGrid};
use entropy_lab::paths::*;
use entropy_lab::quantum::*;
use entropy_lab::sde::*;
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::config::{ControlMode, Kind};
use crate::error::CliError;
use crate::output::Output;
use crate::plan::*;

type Res<T> = Result<T, CliError>;

fn csv(header: &str, rows: &[Vec<f64>]) -> String {
    let mut out = format!("{header}\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// `rate − dD/dt` by central differences; NaN at the ends.
fn fd_residuals(times: &[f64], d: &[f64], rate: &[f64]) -> Vec<f64> {
    (0..times.len())
        .map(|k| {
            if k == 0 || k + 1 == times.len() {
                f64::NAN
            } else {
                rate[k] - (d[k + 1] - d[k - 1]) / (times[k + 1] - times[k - 1])
            }
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().filter(|x| x.is_finite()).fold(0.0, |m, x| m.max(x.abs()))
}

fn estimate(e: &Estimate) -> Value {
    json!({ "value": e.value, "se": e.se })
}

pub fn execute(plan: &Plan, out: &mut Output) -> Res<Value> {
    let wants = |name: &str| plan.files.iter().any(|f| f == name);
    match &plan.body {
        Body::Grid(r) => grid(plan.kind, r, out, &wants),
        Body::Sde(r) => sde(r, out, &wants),
        Body::Polymer(r) => polymer(r, out, &wants),
        Body::Quantum(r) => quantum(r, out, &wants),
        Body::Paths(r) => paths(r, out, &wants),
    }
}

fn linear_field(k: &DMatrix<f64>) -> impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static {
    let k = k.clone();
    move |x: &[f64]| (&k * DVector::from_column_slice(x)).as_slice().to_vec()
}

fn grid(kind: Kind, r: &GridRun, out: &mut Output, wants: &dyn Fn(&str) -> bool) -> Res<Value> {
    let traj: DensityTrajectory = match &r.control {
        GridControl::None => {
            evolve_recorded(&DriftSpec::from_hamiltonian(&r.ham), &r.rho0, 0.0, r.t1, r.dt, r.record_every)?
        }
        GridControl::Gain(alpha, ControlMode::Modulated) => {
            evolve_modulated_recorded(&r.ham, alpha, &r.rho0, r.t1, r.dt, r.record_every)?
        }
        GridControl::Gain(alpha, ControlMode::Feedback) => {
            evolve_feedback(&r.ham, alpha, &r.rho0, r.t1, r.dt, r.record_every)?
        }
        GridControl::Linear(k) => {
            let f = linear_field(k);
            let drift = DriftSpec::from_hamiltonian(&r.ham).with_field(move |x, _| f(x));
            evolve_recorded(&drift, &r.rho0, 0.0, r.t1, r.dt, r.record_every)?
        }
    };
    if wants("trajectory") {
        out.write("trajectory.csv", trajectory_csv(&traj).as_bytes())?;
    }
    if wants("summary") {
        out.write("summary.csv", summary_csv(&traj, Some(&r.equilibrium))?.as_bytes())?;
    }
    let grid = r.rho0.grid();
    let (mut d, mut total, mut pepr, mut epur) = (vec![], vec![], vec![], vec![]);
    for (&t, rho) in traj.times.iter().zip(&traj.densities) {
        let u = match &r.control {
            GridControl::None => VectorFieldGrid::zeros(grid.clone()),
            GridControl::Gain(alpha, _) => feedback_control(rho, &r.equilibrium, alpha.at(t))?,
            GridControl::Linear(k) => VectorFieldGrid::from_fn(grid.clone(), linear_field(k))?,
        };
        let rep = production_decomposition(rho, &r.equilibrium, &u, r.ham.sigma2())?;
        d.push(relative_entropy(rho, &r.equilibrium)?.value);
        total.push(rep.total);
        pepr.push(rep.pepr);
        epur.push(rep.epur);
    }
    let fd = fd_residuals(&traj.times, &d, &total);
    let t = &traj.times;
    if kind == Kind::Decompose {
        if wants("decomposition") {
            let rows: Vec<Vec<f64>> = (0..t.len()).map(|k| vec![t[k], d[k], total[k], pepr[k], epur[k], fd[k]]).collect();
            out.write("decomposition.csv", csv("t,D,total_rate,pepr,epur,fd_check_residual", &rows).as_bytes())?;
        }
    } else if wants("divergence") {
        let rows: Vec<Vec<f64>> = (0..t.len()).map(|k| vec![t[k], d[k], total[k]]).collect();
        out.write("divergence.csv", csv("t,D,rate", &rows).as_bytes())?;
    }
    Ok(json!({
        "initial_divergence": d[0],
        "final_divergence": d[d.len() - 1],
        "initial_rate": total[0],
        "min_pepr": pepr.iter().copied().fold(f64::INFINITY, f64::min),
        "max_fd_check_residual": max_abs(&fd),
        "mass_drift": traj.mass_drift(),
    }))
}

fn moments(ens: &PathEnsemble) -> Value {
    let k = ens.n_times() - 1;
    let dims: Vec<Value> = (0..ens.dim())
        .map(|d| json!({ "mean": estimate(&ens.mean_estimate(k, d)), "variance": estimate(&ens.variance_estimate(k, d)) }))
        .collect();
    json!({ "t": ens.times()[k], "components": dims })
}

fn sde(r: &SdeRun, out: &mut Output, wants: &dyn Fn(&str) -> bool) -> Res<Value> {
    let ens = simulate_overdamped(&r.ham, r.control.clone(), &r.x0, &r.cfg)?;
    if wants("ensemble") {
        out.write("ensemble.csv", ensemble_csv(&ens).as_bytes())?;
    }
    if wants("summary") {
        out.write("summary.csv", ensemble_summary_csv(&ens, None)?.as_bytes())?;
    }
    Ok(json!({ "paths": ens.n_paths(), "final": moments(&ens) }))
}

fn polymer(r: &PolymerRun, out: &mut Output, wants: &dyn Fn(&str) -> bool) -> Res<Value> {
    let many = r.specs.len() > 1;
    let file = |stem: &str, i: usize| if many { format!("{stem}_{i}.csv") } else { format!("{stem}.csv") };
    let mut rows = Vec::new();
    let mut temps = Vec::new();
    for (i, spec) in r.specs.iter().enumerate() {
        let ens = simulate_polymer(spec, &r.cfg)?;
        if wants("ensemble") {
            out.write(&file("ensemble", i), ensemble_csv(&ens).as_bytes())?;
        }
        if wants("summary") {
            out.write(&file("summary", i), ensemble_summary_csv(&ens, Some(spec))?.as_bytes())?;
        }
        let temp = kinetic_temperature(&ens, spec, r.window)?;
        rows.push(vec![spec.alpha_c(), temp.value, temp.se]);
        temps.push(json!({
            "alpha_c": spec.alpha_c(),
            "kinetic_temperature": estimate(&temp),
            "below_thermostat": temp.value + 3.0 * temp.se < spec.kt(),
        }));
    }
    if wants("temperature") {
        out.write("temperature.csv", csv("alpha_c,kinetic_temperature,se", &rows).as_bytes())?;
    }
    let nonincreasing = rows.windows(2).all(|w| w[1][0] < w[0][0] || w[1][1] <= w[0][1]);
    Ok(json!({
        "thermostat": r.specs[0].kt(),
        "window": [r.window.0, r.window.1],
        "gains": temps,
        "nonincreasing_in_gain": nonincreasing,
    }))
}

fn quantum(r: &QuantumRun, out: &mut Output, wants: &dyn Fn(&str) -> bool) -> Res<Value> {
    match r {
        QuantumRun::Closed { h, delta_h, rho0, tilde0, times } => {
            let h_tilde = h.plus(delta_h)?;
            let (mut d, mut rate, mut states) = (vec![], vec![], vec![]);
            for &t in times {
                let rho = evolve_closed(h, rho0, t)?;
                let tilde = evolve_closed(&h_tilde, tilde0, t)?;
                d.push(quantum_relative_entropy(&rho, &tilde));
                rate.push(qrec_rate(&rho, delta_h, &tilde)?);
                states.push(rho);
            }
            let fd = fd_residuals(times, &d, &rate);
            if wants("quantum") {
                let rows: Vec<Vec<f64>> = (0..times.len())
                    .map(|k| vec![times[k], d[k], rate[k], fd[k], states[k].von_neumann_entropy(), states[k].purity()])
                    .collect();
                out.write("quantum.csv", csv("t,D,rate,fd_check_residual,entropy,purity", &rows).as_bytes())?;
            }
            Ok(json!({
                "initial_divergence": d[0],
                "initial_rate": rate[0],
                "max_fd_check_residual": max_abs(&fd),
                "entropy_drift": states.iter().map(|s| (s.von_neumann_entropy() - rho0.von_neumann_entropy()).abs()).fold(0.0, f64::max),
            }))
        }
        QuantumRun::Open { spec, base, delta_h, rho0, reference, t1, dt, record_every } => {
            let traj = lindblad_evolve_recorded(spec, rho0, *t1, *dt, *record_every)?;
            let (mut d, mut total, mut ham_term, mut diss) = (vec![], vec![], vec![], vec![]);
            for rho in &traj.states {
                d.push(quantum_relative_entropy(rho, reference));
                let rates = match delta_h {
                    Some(dh) => qrecd_rate(rho, dh, base, reference)?,
                    None => {
                        let r = dissipative_production_rate(rho, base, reference)?;
                        QrecdRates { total: r, hamiltonian_term: 0.0, dissipative_term: r }
                    }
                };
                total.push(rates.total);
                ham_term.push(rates.hamiltonian_term);
                diss.push(rates.dissipative_term);
            }
            let t = &traj.times;
            let fd = fd_residuals(t, &d, &total);
            let trace = |s: &DensityOperator| s.matrix().trace().re;
            if wants("quantum") {
                let rows: Vec<Vec<f64>> = (0..t.len())
                    .map(|k| {
                        let s = &traj.states[k];
                        vec![t[k], d[k], total[k], ham_term[k], diss[k], fd[k], trace(s), s.purity(), s.von_neumann_entropy()]
                    })
                    .collect();
                let header = "t,D,total_rate,hamiltonian_term,dissipative_term,fd_check_residual,trace,purity,entropy";
                out.write("quantum.csv", csv(header, &rows).as_bytes())?;
            }
            let increase = d.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
            Ok(json!({
                "initial_divergence": d[0],
                "final_divergence": d[d.len() - 1],
                "max_divergence_increase": increase,
                "max_dissipative_term": diss.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                "max_fd_check_residual": max_abs(&fd),
                "max_trace_error": traj.states.iter().map(|s| (trace(s) - 1.0).abs()).fold(0.0, f64::max),
                "max_projection_residue": traj.max_projection_residue,
            }))
        }
    }
}

fn paths(r: &PathsRun, out: &mut Output, wants: &dyn Fn(&str) -> bool) -> Res<Value> {
    let ens = simulate_overdamped(&r.sde.ham, r.sde.control.clone(), &r.sde.x0, &r.sde.cfg)?;
    if wants("ensemble") {
        out.write("ensemble.csv", ensemble_csv(&ens).as_bytes())?;
    }
    let last = ens.n_times() - 1;
    let drifts = |grid| -> entropy_lab::Result<(DriftEstimate, DriftEstimate)> {
        if r.pooled {
            Ok((estimate_forward_drift_pooled(&ens, 0..last, grid)?, estimate_backward_drift_pooled(&ens, 1..last + 1, grid)?))
        } else {
            Ok((estimate_forward_drift(&ens, r.t_index, grid)?, estimate_backward_drift(&ens, r.t_index, grid)?))
        }
    };
    let (beta, gamma) = drifts(&r.drift_grid)?;
    if wants("drifts") {
        out.write("drifts.csv", drift_csv(&beta, &gamma)?.as_bytes())?;
    }
    let current = current_drift(&beta, &gamma)?;
    let current_z = current
        .populated()
        .iter()
        .flat_map(|&c| current.value(c).iter().zip(current.se(c)).map(|(v, s)| (v / s).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);

    let bw = r.bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed);
    let density = if r.pooled {
        estimate_density_pooled(&ens, 0..last + 1, &r.density_grid, bw)?
    } else {
        estimate_density(&ens, r.t_index, &r.density_grid, bw)?
    };
    let (beta_d, gamma_d) = drifts(&r.density_grid)?;
    let osmotic = osmotic_residual(&beta_d, &gamma_d, &density, r.sde.ham.sigma2())?;

    let ham = r.sde.ham.clone();
    let control = r.sde.control.clone();
    let model_drift = move |x: &[f64], t: f64| {
        let mut b = ham.drift(x);
        if let Some(u) = &control {
            b.iter_mut().zip(u(x, t)).for_each(|(bi, ui)| *bi += ui);
        }
        b
    };
    let energy = finite_energy_estimate(&ens, DriftField::Closed(&model_drift))?;

    let k = r.t_index;
    let v = current_drift(&estimate_forward_drift(&ens, k, &r.drift_grid)?, &estimate_backward_drift(&ens, k, &r.drift_grid)?)?;
    let tests: Vec<TestFunction> =
        (0..ens.dim()).flat_map(|d| [TestFunction::coordinate(d), TestFunction::square(d), TestFunction::cosine(d)]).collect();
    let continuity: Vec<Value> = weak_continuity_check(&ens, k, &v, &tests)?
        .iter()
        .map(|c| {
            json!({
                "test_function": c.name,
                "lhs": estimate(&c.lhs),
                "rhs": estimate(&c.rhs),
                "discrepancy": estimate(&c.discrepancy),
                "excluded_fraction": c.excluded_fraction,
                "pass": c.pass,
            })
        })
        .collect();
    Ok(json!({
        "paths": ens.n_paths(),
        "pooled": r.pooled,
        "t_index": k,
        "osmotic_residual": osmotic,
        "current_drift_max_z": current_z,
        "finite_energy": estimate(&energy.estimate),
        "continuity": continuity,
    }))
}
