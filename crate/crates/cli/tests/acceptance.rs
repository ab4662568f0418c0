//! Acceptance suite: one PASS/FAIL line per criterion.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::Instant;

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dosewise_core::dose::{dose_for_record, ppm_to_ug_per_liter, DoseModelParams, EeSource, Gender, PersonProfile};
use dosewise_core::field::{ConcentrationField, FieldError, GridAxes, GridField};
use dosewise_core::minimizer::{brute_force, evaluation_count, heuristic, schedule_grid_size, RouteSource, Scenario, VentilationSpec};
use dosewise_core::report::run_optimization;
use dosewise_core::routing::{expand_per_minute, GraphProvider, RoadGraph, RouteProfile, RouteProvider, RouteSegment, RoutingError};
use dosewise_core::scenario::{load_field_path, load_scenario_file, SearchMode};
use dosewise_core::trace::{
    dose_series, exposure_profile, reduction_percent, round_one_decimal, parse_records, ActivityRecord, Category, ParseOptions,
    ProfileOptions, Subject, Trace,
};
use dosewise_core::{ActivityMode, CommuteMode, LatLon, OptimizationReport64};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").canonicalize().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

fn at(h: u32, m: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2016, 9, 12).unwrap().and_hms_opt(h, m, 0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

// 1 -------------------------------------------------------------------------

fn reduction_arithmetic() -> Outcome {
    // (original, minimized, reported %) for the walker, biker and driver rows
    // of the fixed-route, alternative-route and 8-minute tables.
    let cells: [(f64, f64, f64); 9] = [
        (3614.8, 3593.6, 0.6),
        (20508.8, 17617.9, 14.1),
        (19189.1, 17575.7, 8.4),
        (3614.8, 3593.6, 0.6),
        (20508.8, 16265.9, 20.7),
        (19189.1, 14214.7, 25.9),
        (3614.8, 3593.6, 0.6),
        (20508.8, 16937.2, 17.4),
        (19189.1, 15293.7, 20.3),
    ];
    let mut worst = 0.0f64;
    for (orig, min, reported) in cells {
        let r = reduction_percent(orig, min).map_err(|e| e.to_string())?;
        let shown = round_one_decimal(r);
        ensure!((shown - reported).abs() <= 0.05, "({orig}, {min}) gives {r:.4}% shown as {shown}, table has {reported}");
        worst = worst.max((r - reported).abs());
    }
    Ok(format!("9 cells, largest unrounded deviation {worst:.3} pp"))
}

// 2 -------------------------------------------------------------------------

fn straight_line_dose(bm: f64, a: f64, b: f64, c: f64, d: f64, met: f64, ppm: f64) -> f64 {
    let rmr = 0.166 * (a + b * bm);
    let ee = met * rmr;
    let vo2 = 0.205 * ee;
    let vr = bm * (c + d * (vo2 / bm).ln()).exp();
    vr * ppm * 28.01 / 24.45
}

fn dose_chain_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_160_912);
    let modes = [ActivityMode::Home, ActivityMode::Work, ActivityMode::Walking, ActivityMode::Cycling, ActivityMode::Driving];
    let mut worst = 0.0f64;
    for n in 0..1000 {
        let gender = if rng.random_bool(0.5) { Gender::Female } else { Gender::Male };
        let age = rng.random_range(5..=100u32);
        let bm = rng.random_range(15.0..150.0);
        let (a, b) = (rng.random_range(1.5..4.0), rng.random_range(0.02..0.1));
        let (c, d) = (rng.random_range(3.0..3.7), rng.random_range(1.0..1.15));
        let met = rng.random_range(0.9..12.0);
        let ppm = rng.random_range(0.0..20.0);
        let mode = modes[rng.random_range(0..modes.len())];

        let mut params = DoseModelParams::<f64>::fixture();
        for band in &mut params.bands {
            (band.rmr_a, band.rmr_b, band.vent_c, band.vent_d) = (a, b, c, d);
        }
        params.met.insert(mode, met);
        let person = PersonProfile::new(age, gender, bm).map_err(|e| e.to_string())?;
        let record = ActivityRecord { timestamp: at(9, 0), activity_mode: mode, pos: LatLon::new(0.0, 0.0), manual_ee: None, sensor_ee: None };
        let pc = ppm_to_ug_per_liter(ppm, &params.conversion).map_err(|e| e.to_string())?;
        let got = dose_for_record(&record, &person, &params, pc).map_err(|e| format!("tuple {n}: {e}"))?.dose_ug_min;
        let want = straight_line_dose(bm, a, b, c, d, met, ppm);
        let r = rel(got, want);
        ensure!(r <= 1e-9, "tuple {n}: {got} vs {want} (rel {r:e})");
        worst = worst.max(r);
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 1.0, "took {secs:.2} s");
    Ok(format!("1000 tuples, max rel error {worst:.1e}, {secs:.3} s"))
}

// 3 -------------------------------------------------------------------------

/// Coarse synthetic field: a time-of-day bump scaled per east-west corridor.
/// Corridor membership is a step in latitude, so the value does not depend
/// on how a sample position was interpolated.
#[derive(Clone)]
struct CorridorField {
    base: f64,
    peak_minute: f64,
    width: f64,
    weight: [f64; 3],
}

impl CorridorField {
    fn ppm(&self, lat: f64, minute: f64) -> f64 {
        let corridor = (((lat + 34.0) / 0.05).round() as usize).min(2);
        let z = (minute - self.peak_minute) / self.width;
        self.base + self.weight[corridor] * (-z * z).exp()
    }
}

impl ConcentrationField<f64> for CorridorField {
    fn concentration_at(&self, pos: LatLon, time: NaiveDateTime) -> Result<f64, FieldError> {
        Ok(self.ppm(pos.lat, (time - at(0, 0)).num_milliseconds() as f64 / 60_000.0))
    }
}

struct Alternatives(Vec<RouteProfile>, Vec<RouteProfile>);

impl RouteProvider for Alternatives {
    fn get_routes(&self, origin: &str, _: &str, _: CommuteMode, _: NaiveDateTime) -> Result<Vec<RouteProfile>, RoutingError> {
        Ok(if origin == "home" { self.0.clone() } else { self.1.clone() })
    }
}

fn corridor_route(id: String, corridor: usize, duration_s: u32, outbound: bool) -> RouteProfile {
    let lat = -34.0 + 0.05 * corridor as f64;
    let (a, b) = (LatLon::new(lat, 151.0), LatLon::new(lat, 151.1));
    let polyline = if outbound { vec![a, b] } else { vec![b, a] };
    RouteProfile::new(id, CommuteMode::Cycling, vec![RouteSegment { duration_s, distance_m: 9000.0, polyline }]).unwrap()
}

fn brute_force_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let person = PersonProfile::new(29, Gender::Male, 72.0).unwrap();
    let params = DoseModelParams::<f64>::fixture();
    let band = params.band(Gender::Male, 29).unwrap().clone();
    let scenarios = 25;
    for n in 0..scenarios {
        let field = CorridorField {
            base: rng.random_range(0.05..1.0),
            peak_minute: rng.random_range(450.0..620.0),
            width: rng.random_range(10.0..60.0),
            weight: [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)],
        };
        let legs = |rng: &mut ChaCha8Rng, prefix: &str| -> Vec<(String, usize, u32)> {
            (0..rng.random_range(1..=2usize))
                .map(|i| (format!("{prefix}{i}"), rng.random_range(0..3usize), rng.random_range(60..1500u32)))
                .collect()
        };
        let (out, back) = (legs(&mut rng, "o"), legs(&mut rng, "b"));
        let omega0 = rng.random_range(420..540i64);
        let omega_span = rng.random_range(0..=30i64);
        let beta0 = rng.random_range(20..90u32);
        let beta_span = rng.random_range(0..=30u32);
        let ee = rng.random_range(1.2..6.0);

        let provider = Alternatives(
            out.iter().map(|(id, c, d)| corridor_route(id.clone(), *c, *d, true)).collect(),
            back.iter().map(|(id, c, d)| corridor_route(id.clone(), *c, *d, false)).collect(),
        );
        let scenario = Scenario {
            person: person.clone(),
            params: params.clone(),
            field: Arc::new(field.clone()),
            routes: RouteSource::Provider { provider: Arc::new(provider), home: "home".into(), work: "work".into() },
            mode: CommuteMode::Cycling,
            omega_window: (at(0, 0) + Duration::minutes(omega0), at(0, 0) + Duration::minutes(omega0 + omega_span)),
            beta_window: (beta0, beta0 + beta_span),
            granularity: 1,
            ventilation: VentilationSpec::EeKcalMin(ee),
        };
        let got = brute_force(&scenario).map_err(|e| format!("scenario {n}: {e}"))?;

        // Exhaustive search straight from the objective.
        let vr = 72.0 * (band.vent_c + band.vent_d * (0.205 * ee / 72.0).ln()).exp();
        let leg = |corridor: usize, secs: u32, depart: f64| -> f64 {
            let lat = -34.0 + 0.05 * corridor as f64;
            (0..=secs / 60).map(|m| field.ppm(lat, depart + f64::from(m)) * 28.01 / 24.45 * vr).fold(0.0, |s, x| s + x)
        };
        let mut best: Option<(f64, i64, u32, &str, &str)> = None;
        for omega in omega0..=omega0 + omega_span {
            for beta in beta0..=beta0 + beta_span {
                for (id1, c1, d1) in &out {
                    for (id2, c2, d2) in &back {
                        let dose = leg(*c1, *d1, omega as f64) + leg(*c2, *d2, omega as f64 + f64::from(*d1) / 60.0 + f64::from(beta));
                        let cand = (dose, omega, beta, id1.as_str(), id2.as_str());
                        if best.is_none_or(|b| cand.0 < b.0 || (cand.0 == b.0 && (cand.1, cand.2, cand.3, cand.4) < (b.1, b.2, b.3, b.4))) {
                            best = Some(cand);
                        }
                    }
                }
            }
        }
        let (dose, omega, beta, id1, id2) = best.unwrap();
        ensure!(got.min_dose_ug == dose, "scenario {n}: minimum {} vs oracle {dose}", got.min_dose_ug);
        ensure!(
            got.argmin.omega == at(0, 0) + Duration::minutes(omega)
                && got.argmin.beta_minutes == beta
                && got.argmin.route1.route_id == id1
                && got.argmin.route2.route_id == id2,
            "scenario {n}: argmin ({}, {}, {}, {}) vs oracle ({omega}, {beta}, {id1}, {id2})",
            got.argmin.omega,
            got.argmin.beta_minutes,
            got.argmin.route1.route_id,
            got.argmin.route2.route_id
        );
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!("{scenarios} scenarios, exact minimum and argmin, {secs:.2} s"))
}

// 4 -------------------------------------------------------------------------

fn driver() -> dosewise_core::scenario::LoadedScenario<f64> {
    load_scenario_file(&fixture("scenario_driver.json")).unwrap()
}

fn heuristic_contracts() -> Outcome {
    let loaded = driver();
    let joint = loaded.for_search(SearchMode::Joint);

    let t0 = Instant::now();
    let mut exact = brute_force(&joint).map_err(|e| e.to_string())?;
    let t1_secs = t0.elapsed().as_secs_f64();
    let mut h1 = heuristic(&joint, 1).map_err(|e| e.to_string())?;
    exact.wall_time_s = 0.0;
    h1.wall_time_s = 0.0;
    ensure!(h1 == exact, "heuristic(t=1) differs from brute force");

    let pairs = 3 * 3;
    let mut prev = exact.min_dose_ug;
    let mut t8_secs = f64::INFINITY;
    for t in [1u32, 2, 4, 8] {
        let r = if t == 1 { exact.clone() } else { heuristic(&joint, t).map_err(|e| e.to_string())? };
        ensure!(r.min_dose_ug >= prev, "t={t}: minimum {} below finer grid's {prev}", r.min_dose_ug);
        prev = r.min_dose_ug;
        let closed = schedule_grid_size(joint.omega_window, joint.beta_window, t) * pairs;
        ensure!(r.evaluation_count == closed, "t={t}: {} evaluations, closed form {closed}", r.evaluation_count);
        if t == 8 {
            for _ in 0..3 {
                let s = Instant::now();
                heuristic(&joint, 8).map_err(|e| e.to_string())?;
                t8_secs = t8_secs.min(s.elapsed().as_secs_f64());
            }
        }
    }

    let mut hour = joint.clone();
    hour.omega_window = (at(8, 0), at(9, 0));
    hour.beta_window = (480, 540);
    let c1 = evaluation_count(&hour).map_err(|e| e.to_string())?;
    let c8 = evaluation_count(&hour.clone().with_granularity(8)).map_err(|e| e.to_string())?;
    ensure!(c8 * 49 <= c1, "count(t=8)/count(t=1) = {c8}/{c1} exceeds 1/49");

    let speedup = t1_secs / t8_secs;
    ensure!(speedup > 10.0, "wall-time ratio t=1/t=8 is only {speedup:.1}x ({t1_secs:.3} s vs {t8_secs:.3} s)");
    Ok(format!(
        "t=1 identical to brute force, nested minima non-decreasing, counts match, 60-min ratio {c8}/{c1}, speedup {speedup:.0}x ({t1_secs:.2} s vs {t8_secs:.3} s)"
    ))
}

// 5 -------------------------------------------------------------------------

fn rush_hour_scenario() -> Outcome {
    let loaded = driver();
    let joint = run_optimization(&loaded, SearchMode::Joint, 1, None).map_err(|e| e.to_string())?;
    let fixed = run_optimization(&loaded, SearchMode::Fixed, 1, None).map_err(|e| e.to_string())?;
    let (rj, rf) = (joint.summary.reduction_percent, fixed.summary.reduction_percent);
    ensure!(rj > 0.0 && rf > 0.0, "reductions joint {rj:.2}% fixed {rf:.2}%");
    let peak = (NaiveTime::from_hms_opt(8, 0, 0).unwrap(), NaiveTime::from_hms_opt(9, 30, 0).unwrap());
    for (name, r) in [("joint", &joint), ("fixed", &fixed)] {
        let dep = r.result.argmin.omega.time();
        ensure!(!(dep >= peak.0 && dep < peak.1), "{name} argmin departs at {dep}, inside the 08:00-09:30 peak");
    }
    ensure!(rj >= rf, "joint reduction {rj:.2}% below fixed {rf:.2}%");
    Ok(format!(
        "fixed {rf:.1}% (depart {}), joint {rj:.1}% (depart {}, routes {}/{})",
        fixed.result.argmin.omega.time(),
        joint.result.argmin.omega.time(),
        joint.result.argmin.route1.route_id,
        joint.result.argmin.route2.route_id
    ))
}

// 6 -------------------------------------------------------------------------

fn load_trace(csv: &str) -> Trace<f64> {
    let subject = Subject::load(&fixture("subject_driver.json")).unwrap();
    let records = parse_records(&fs::read_to_string(fixture(csv)).unwrap(), &ParseOptions::default()).unwrap();
    Trace::new(subject, records).unwrap()
}

fn profile_invariants() -> Outcome {
    let rush = load_field_path::<f64>(&fixture("field_rush_hour.json")).map_err(|e| e.to_string())?;
    let params = DoseModelParams::<f64>::fixture();

    let day = load_trace("trace_driver_day.csv");
    let series = dose_series(&day, rush.as_ref(), &params, EeSource::Auto).map_err(|e| e.to_string())?;
    let all_day = ProfileOptions { window: None, ..ProfileOptions::default() };
    for opts in [ProfileOptions::default(), all_day] {
        let p = exposure_profile(&day, &series, &opts).map_err(|e| e.to_string())?;
        let share_sum: f64 = Category::ALL.iter().map(|&c| p.share(c).dose_share).sum();
        let time_sum: f64 = Category::ALL.iter().map(|&c| p.share(c).time_share).sum();
        ensure!((share_sum - 1.0).abs() <= 1e-9 && (time_sum - 1.0).abs() <= 1e-9, "shares sum to {share_sum}, {time_sum}");
        let in_window = |t: NaiveDateTime| opts.window.is_none_or(|(a, b)| t.time() >= a && t.time() <= b);
        let series_sum: f64 = series.iter().filter(|s| in_window(s.timestamp)).map(|s| s.sample.dose_ug_min).sum();
        ensure!(rel(p.total_dose_ug, series_sum) <= 1e-12, "total {} vs series sum {series_sum}", p.total_dose_ug);
    }

    let work = load_trace("trace_all_work.csv");
    let ws = dose_series(&work, rush.as_ref(), &params, EeSource::Auto).map_err(|e| e.to_string())?;
    let wp = exposure_profile(&work, &ws, &ProfileOptions::default()).map_err(|e| e.to_string())?;
    ensure!(wp.share(Category::Work).time_share == 1.0 && wp.share(Category::Work).dose_share == 1.0, "all-work trace is not 100% work");

    // Uniform field and d = 1, so minute dose is proportional to EE:
    // 4 home minutes at 1.0, 3 work at 1.0, 3 driving at 2.0 -> 4:3:6.
    let linear = DoseModelParams::<f64>::load(&fixture("params_linear_vent.json")).map_err(|e| e.to_string())?;
    let uniform = load_field_path::<f64>(&fixture("field_uniform.json")).map_err(|e| e.to_string())?;
    let hand = load_trace("trace_hand_shares.csv");
    let hs = dose_series(&hand, uniform.as_ref(), &linear, EeSource::Auto).map_err(|e| e.to_string())?;
    let hp = exposure_profile(&hand, &hs, &ProfileOptions::default()).map_err(|e| e.to_string())?;
    let expected = [(Category::Home, 0.4, 4.0 / 13.0), (Category::Work, 0.3, 3.0 / 13.0), (Category::Commute, 0.3, 6.0 / 13.0), (Category::Other, 0.0, 0.0)];
    for (c, time, dose) in expected {
        let s = hp.share(c);
        ensure!(
            (s.time_share - time).abs() <= 1e-12 && (s.dose_share - dose).abs() <= 1e-12,
            "{}: time {} dose {}, hand values {time} {dose}",
            c.as_str(),
            s.time_share,
            s.dose_share
        );
    }
    Ok("driver-day shares sum to 1 and match the series; all-work 100% work; hand trace 4/13, 3/13, 6/13".into())
}

// 7 -------------------------------------------------------------------------

fn interpolation_and_routing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    let mut grid_checks = 0;
    for _ in 0..50 {
        let (nlat, nlon, nt) = (rng.random_range(2..6usize), rng.random_range(2..6usize), rng.random_range(2..4usize));
        let axes = GridAxes {
            lat0: 0.0,
            lon0: 0.0,
            dlat: rng.random_range(0.001..0.05),
            dlon: rng.random_range(0.001..0.05),
            nlat,
            nlon,
            t0: at(6, 0),
            dt_minutes: rng.random_range(5.0..90.0),
            nt,
        };
        let values: Vec<f64> = (0..nlat * nlon * nt).map(|_| rng.random_range(0.0..30.0)).collect();
        let f = GridField::new(axes.clone(), values).map_err(|e| e.to_string())?;
        let q = |p: LatLon, t: NaiveDateTime| f.concentration_at(p, t).map_err(|e| e.to_string());
        for k in 0..nt {
            for i in 0..nlat {
                for j in 0..nlon {
                    let v = q(axes.node_pos(i, j), axes.slice_time(k))?;
                    ensure!(v == f.value(k, i, j), "node ({k},{i},{j}): {v} vs {}", f.value(k, i, j));
                    grid_checks += 1;
                }
            }
        }
        for _ in 0..40 {
            let (y, x, tk) = (rng.random_range(0.0..(nlat - 1) as f64), rng.random_range(0.0..(nlon - 1) as f64), rng.random_range(0.0..(nt - 1) as f64));
            let time = axes.t0 + Duration::microseconds((tk * axes.dt_minutes * 60e6).round() as i64);
            let v = q(LatLon::new(y * axes.dlat, x * axes.dlon), time)?;
            let (i, j, k) = (y as usize, x as usize, tk as usize);
            let corners: Vec<f64> = [(k, i, j), (k, i + 1, j), (k, i, j + 1), (k, i + 1, j + 1)]
                .iter()
                .flat_map(|&(k, i, j)| [f.value(k, i, j), f.value(k + 1, i, j)])
                .collect();
            let (lo, hi) = corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &c| (l.min(c), h.max(c)));
            ensure!(v >= lo - 1e-9 && v <= hi + 1e-9, "interpolated {v} outside neighbours [{lo}, {hi}]");
            if nlat > 2 {
                let edge = rng.random_range(1..nlat - 1) as f64 * axes.dlat;
                let eps = axes.dlat * 1e-12;
                let lon = x * axes.dlon;
                let (below, above) = (q(LatLon::new(edge - eps, lon), time)?, q(LatLon::new(edge + eps, lon), time)?);
                ensure!((below - above).abs() <= 1e-9, "edge discontinuity {below} vs {above}");
            }
            grid_checks += 1;
        }
    }

    for n in 0..500 {
        let mut cursor = LatLon::new(-33.9, 151.1);
        let segments: Vec<RouteSegment> = (0..rng.random_range(1..5))
            .map(|_| {
                let mut polyline = vec![cursor];
                for _ in 0..rng.random_range(1..4) {
                    cursor = LatLon::new(cursor.lat + rng.random_range(-0.02..0.02), cursor.lon + rng.random_range(-0.02..0.02));
                    polyline.push(cursor);
                }
                RouteSegment { duration_s: rng.random_range(1..2400), distance_m: 1000.0, polyline }
            })
            .collect();
        let total: u64 = segments.iter().map(|s| u64::from(s.duration_s)).sum();
        let route = RouteProfile::new(format!("r{n}"), CommuteMode::Walking, segments).map_err(|e| e.to_string())?;
        let path = expand_per_minute(&route);
        ensure!(path.len() as u64 == total / 60 + 1, "route {n}: {} samples for {total} s", path.len());
        ensure!(path.samples.iter().enumerate().all(|(m, s)| s.minute_offset as usize == m), "route {n}: minute offsets");
    }

    let mut diamonds = Vec::new();
    for (file, s, t) in [("graph_diamond.json", "s", "t"), ("graph_city.json", "H", "W")] {
        let graph = RoadGraph::load(&fixture(file)).map_err(|e| e.to_string())?;
        let mut all = simple_paths(&graph, s, t);
        all.sort();
        let provider = GraphProvider::new(graph).map_err(|e| e.to_string())?;
        let got: Vec<(u64, String)> = provider
            .get_routes(s, t, CommuteMode::Driving, at(8, 0))
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|r| (r.total_duration_s, r.route_id))
            .collect();
        let want: Vec<_> = all.iter().take(3).cloned().collect();
        ensure!(got == want, "{file}: provider {got:?}, enumeration {want:?}");
        diamonds.push(format!("{file} {} of {} paths", got.len(), all.len()));
    }
    Ok(format!("{grid_checks} grid checks, 500 routes, {}", diamonds.join(", ")))
}

fn simple_paths(g: &RoadGraph, s: &str, t: &str) -> Vec<(u64, String)> {
    fn walk(g: &RoadGraph, here: &str, t: &str, path: &mut Vec<String>, secs: u64, out: &mut Vec<(u64, String)>) {
        if here == t {
            out.push((secs, path.join(">")));
            return;
        }
        for e in &g.edges {
            let next = match () {
                _ if e.from == here => &e.to,
                _ if e.to == here && !e.oneway => &e.from,
                _ => continue,
            };
            if !path.contains(next) {
                path.push(next.clone());
                walk(g, next, t, path, secs + u64::from(e.duration_s), out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(g, s, t, &mut vec![s.to_string()], 0, &mut out);
    out
}

// 8 -------------------------------------------------------------------------

struct Server {
    child: Child,
    base: String,
}

impl Server {
    fn start(config: &Path) -> Result<Self, String> {
        let mut child = Command::new(env!("CARGO_BIN_EXE_dosewise"))
            .args(["serve", "--config"])
            .arg(config)
            .env_remove("DOSEWISE_PORT")
            .env_remove("DOSEWISE_DATA_DIR")
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).map_err(|e| e.to_string())?;
        let base = line.trim().strip_prefix("listening on ").ok_or_else(|| format!("unexpected banner {line:?}"))?.to_string();
        Ok(Self { child, base })
    }

    fn get(&self, path: &str) -> Result<String, String> {
        ureq::get(format!("{}{path}", self.base)).call().map_err(|e| format!("GET {path}: {e}"))?.into_body().read_to_string().map_err(|e| e.to_string())
    }

    fn post(&self, path: &str, body: &str) -> Result<String, String> {
        ureq::post(format!("{}{path}", self.base))
            .header("x-owner", "acceptance")
            .send(body)
            .map_err(|e| format!("POST {path}: {e}"))?
            .into_body()
            .read_to_string()
            .map_err(|e| e.to_string())
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dosewise"))
        .args(args)
        .env_remove("DOSEWISE_PORT")
        .env_remove("DOSEWISE_DATA_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("dosewise {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8(out.stdout).unwrap())
}

fn cross_interface_parity() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("dosewise.toml");
    let data = tmp.path().join("data");
    fs::write(&config, format!("port = 0\ndata_dir = {:?}\nassets_dir = {:?}\n", data, fixtures())).map_err(|e| e.to_string())?;
    let path = |name: &str| fixture(name).to_string_lossy().into_owned();

    let server = Server::start(&config)?;
    let csv = fs::read_to_string(fixture("trace_driver_day.csv")).unwrap();
    let upload: serde_json::Value = serde_json::from_str(&server.post("/traces", &csv)?).map_err(|e| e.to_string())?;
    let id = upload["trace_id"].as_str().ok_or("no trace_id")?.to_string();

    let served = server.get(&format!("/traces/{id}/profile?field=field_rush_hour.json&subject=subject_driver.json"))?;
    let profile_cli = cli(&["profile", "--trace", &path("trace_driver_day.csv"), "--subject", &path("subject_driver.json"), "--field", &path("field_rush_hour.json")])?;
    ensure!(served.trim_end() == profile_cli.trim_end(), "profile documents differ between service and CLI");
    let stored_cli = cli(&[
        "profile", "--config", &config.to_string_lossy(), "--trace-id", &id, "--subject", &path("subject_driver.json"), "--field",
        &path("field_rush_hour.json"),
    ])?;
    ensure!(stored_cli == profile_cli, "profile of the stored trace differs from the CSV");

    let scenario = fs::read_to_string(fixture("scenario_small.json")).unwrap();
    let served: OptimizationReport64 = serde_json::from_str(&server.post("/optimize?granularity=2", &scenario)?).map_err(|e| e.to_string())?;
    let out = tmp.path().join("optimize");
    cli(&["optimize", "--scenario", &path("scenario_small.json"), "--granularity", "2", "--out", &out.to_string_lossy()])?;
    let printed: OptimizationReport64 = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).map_err(|e| e.to_string())?;
    ensure!(served.without_timing() == printed.without_timing(), "optimization reports differ between service and CLI");

    let before = server.get(&format!("/traces/{id}"))?;
    drop(server);
    let server = Server::start(&config)?;
    let after = server.get(&format!("/traces/{id}"))?;
    ensure!(before == after, "stored trace changed across restart");
    Ok(format!(
        "profile bytes equal ({} B), reports equal bar wall time ({} rows), trace {} identical after restart",
        profile_cli.len(),
        printed.result.table_t.len(),
        &id[..8]
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("reduction arithmetic", reduction_arithmetic),
        ("dose-chain oracle", dose_chain_oracle),
        ("brute-force correctness", brute_force_oracle),
        ("heuristic contracts", heuristic_contracts),
        ("rush-hour scenario", rush_hour_scenario),
        ("profile invariants", profile_invariants),
        ("interpolation and routing", interpolation_and_routing),
        ("cross-interface parity", cross_interface_parity),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", n + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
