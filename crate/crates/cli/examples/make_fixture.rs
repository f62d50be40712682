//! Writes the reconstructed 2024 dataset under `fixtures/2024/`.
//!
//! Markets: a latent national environment `m_t` (Trump margin, points) drives
//! every state price through `Φ((m_t + lean + idio_t) / 3.5)`; the national
//! price is the electoral-college win probability computed from the same state
//! means with common-random-number scenarios. `m_t` is pinned to a hand-picked
//! national price path and perturbed by Brownian bridges between anchors.
//!
//! Polls: 538-style long rows (one row per candidate per question), with
//! pollster house effects, sampling noise and integer rounding.
//!
//! Usage: `cargo run -p bsts-cli --example make_fixture [-- <out-dir>]`

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use bsts_core::ingest::{NATIONAL, STATES};
use bsts_core::DateStamp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal as Gauss};

const SEED: u64 = 20241105;
const STATE_SD: f64 = 3.5;
const COMMON_SD: f64 = 2.5;
const SCENARIOS: usize = 4000;

/// (code, electoral votes, margin lean in points at m = 0).
const LEANS: [(&str, u32, f64); 50] = [
    ("AL", 9, 20.0), ("AK", 3, 8.0), ("AZ", 11, 2.0), ("AR", 6, 20.0), ("CA", 54, -15.0),
    ("CO", 10, -9.0), ("CT", 7, -11.0), ("DE", 3, -11.0), ("FL", 30, 7.0), ("GA", 16, 1.6),
    ("HI", 4, -17.0), ("ID", 4, 24.0), ("IL", 19, -9.0), ("IN", 11, 12.0), ("IA", 6, 7.5),
    ("KS", 6, 10.0), ("KY", 8, 20.0), ("LA", 8, 14.0), ("ME", 4, -5.5), ("MD", 10, -20.0),
    ("MA", 11, -18.0), ("MI", 15, -0.3), ("MN", 10, -4.0), ("MS", 6, 15.0), ("MO", 10, 11.0),
    ("MT", 4, 12.0), ("NE", 5, 13.0), ("NV", 6, 0.6), ("NH", 4, -3.4), ("NJ", 14, -5.5),
    ("NM", 5, -5.5), ("NY", 28, -10.0), ("NC", 16, 1.4), ("ND", 3, 24.0), ("OH", 17, 6.5),
    ("OK", 7, 23.0), ("OR", 8, -11.0), ("PA", 19, 0.5), ("RI", 4, -10.0), ("SC", 9, 11.0),
    ("SD", 3, 19.0), ("TN", 11, 19.0), ("TX", 40, 7.0), ("UT", 6, 14.0), ("VT", 3, -22.0),
    ("VA", 13, -4.5), ("WA", 12, -13.0), ("WV", 4, 28.0), ("WI", 10, 0.1), ("WY", 3, 30.0),
];
/// District of Columbia, never competitive.
const DC_VOTES: u32 = 3;

/// Hand-picked national price path; linear between anchors.
const NATIONAL_ANCHORS: &[(&str, f64)] = &[
    ("2024-03-01", 0.52), ("2024-03-20", 0.53), ("2024-04-01", 0.53), ("2024-04-20", 0.54),
    ("2024-05-05", 0.51), ("2024-05-14", 0.465), ("2024-05-24", 0.505), ("2024-05-31", 0.53),
    ("2024-06-12", 0.55), ("2024-06-26", 0.58), ("2024-06-30", 0.63), ("2024-07-06", 0.655),
    ("2024-07-12", 0.66), ("2024-07-15", 0.695), ("2024-07-18", 0.71), ("2024-07-20", 0.695),
    ("2024-07-23", 0.635), ("2024-07-28", 0.61), ("2024-08-03", 0.57), ("2024-08-10", 0.54),
    ("2024-08-20", 0.515), ("2024-08-30", 0.52), ("2024-09-06", 0.52), ("2024-09-10", 0.515),
    ("2024-09-13", 0.475), ("2024-09-20", 0.47), ("2024-09-27", 0.495), ("2024-10-03", 0.52),
    ("2024-10-08", 0.55), ("2024-10-13", 0.58), ("2024-10-18", 0.615), ("2024-10-22", 0.635),
    ("2024-10-26", 0.65), ("2024-10-29", 0.655), ("2024-10-31", 0.65), ("2024-11-01", 0.63),
    ("2024-11-02", 0.615), ("2024-11-03", 0.615), ("2024-11-04", 0.605), ("2024-11-05", 0.965),
    ("2024-11-06", 0.985),
];

const MARKET_START: &str = "2024-03-01";
const MARKET_END: &str = "2024-11-06";
const POLL_START: &str = "2024-03-15";
const POLL_END: &str = "2024-11-05";
const NOMINEE_SWITCH: &str = "2024-07-21";
const THIRD_PARTY_EXIT: &str = "2024-08-23";

fn d(s: &str) -> DateStamp {
    DateStamp::parse(s).expect("literal date")
}

fn days(start: DateStamp, end: DateStamp) -> Vec<DateStamp> {
    (0..=start.days_until(end)).map(|k| start.add_days(k)).collect()
}

struct Electorate {
    votes: Vec<u32>,
    common: Vec<f64>,
    /// scenarios x states
    shocks: Vec<f64>,
}

impl Electorate {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let n = LEANS.len();
        let common = (0..SCENARIOS).map(|_| rng.sample::<f64, _>(StandardNormal) * COMMON_SD).collect();
        let own = (STATE_SD * STATE_SD - COMMON_SD * COMMON_SD).sqrt();
        let shocks = (0..SCENARIOS * n).map(|_| rng.sample::<f64, _>(StandardNormal) * own).collect();
        let votes: Vec<u32> = LEANS.iter().map(|l| l.1).collect();
        assert_eq!(votes.iter().sum::<u32>() + DC_VOTES, 538);
        Electorate { votes, common, shocks }
    }

    /// Share of scenarios with at least 270 votes given state mean margins.
    fn win_probability(&self, means: &[f64]) -> f64 {
        let n = means.len();
        let wins = (0..SCENARIOS)
            .filter(|&k| {
                let ev: u32 = (0..n)
                    .filter(|&s| means[s] + self.common[k] + self.shocks[k * n + s] > 0.0)
                    .map(|s| self.votes[s])
                    .sum();
                ev >= 270
            })
            .count();
        wins as f64 / SCENARIOS as f64
    }

    /// Environment `m` whose zero-idiosyncrasy win probability is `p`.
    fn invert(&self, table: &[(f64, f64)], p: f64) -> f64 {
        let i = table.partition_point(|&(_, q)| q < p).clamp(1, table.len() - 1);
        let ((m0, p0), (m1, p1)) = (table[i - 1], table[i]);
        if p1 > p0 {
            m0 + (p - p0) / (p1 - p0) * (m1 - m0)
        } else {
            m0
        }
    }
}

fn interpolate(anchors: &[(DateStamp, f64)], t: DateStamp) -> f64 {
    let i = anchors.partition_point(|a| a.0 <= t).clamp(1, anchors.len() - 1);
    let ((d0, v0), (d1, v1)) = (anchors[i - 1], anchors[i]);
    let span = d0.days_until(d1);
    if span == 0 {
        return v1;
    }
    v0 + (v1 - v0) * d0.days_until(t) as f64 / span as f64
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

struct Pollster {
    name: String,
    house: f64,
    decimals: bool,
}

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/2024"));
    fs::create_dir_all(out.join("markets")).expect("create fixture dir");
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let gauss = Gauss::new(0.0, 1.0).expect("unit normal");

    // National environment path.
    let elect = Electorate::new(&mut rng);
    let table: Vec<(f64, f64)> = (-600..=600)
        .map(|k| {
            let m = k as f64 * 0.02;
            let means: Vec<f64> = LEANS.iter().map(|l| m + l.2).collect();
            (m, elect.win_probability(&means))
        })
        .collect();
    let anchors: Vec<(DateStamp, f64)> = NATIONAL_ANCHORS.iter().map(|(s, p)| (d(s), *p)).collect();
    let axis = days(d(MARKET_START), d(MARKET_END));
    let mut env: Vec<f64> = axis.iter().map(|t| elect.invert(&table, interpolate(&anchors, *t))).collect();
    // Brownian bridge noise between consecutive anchors.
    let step = Normal::new(0.0, 0.07).expect("sd");
    for w in anchors.windows(2) {
        let (i0, i1) = (d(MARKET_START).days_until(w[0].0) as usize, d(MARKET_START).days_until(w[1].0) as usize);
        let len = i1 - i0;
        let mut walk = vec![0.0; len + 1];
        for k in 1..=len {
            walk[k] = walk[k - 1] + step.sample(&mut rng);
        }
        for k in 1..len {
            env[i0 + k] += walk[k] - walk[len] * k as f64 / len as f64;
        }
    }

    // Idiosyncratic AR(1) state deviations; the Midwest gets more of them and
    // an extra dip on 2024-11-03.
    let n_states = LEANS.len();
    let mut idio = vec![vec![0.0; axis.len()]; n_states];
    for (s, (code, _, _)) in LEANS.iter().enumerate() {
        let sd = match *code {
            "PA" | "MI" => 0.2,
            "WI" => 0.1,
            "AZ" | "GA" | "NC" | "NV" => 0.06,
            _ => 0.04,
        };
        let noise = Normal::new(0.0, sd).expect("sd");
        for t in 1..axis.len() {
            idio[s][t] = 0.97 * idio[s][t - 1] + noise.sample(&mut rng);
        }
        if matches!(*code, "MI" | "WI") {
            let t = d(MARKET_START).days_until(d("2024-11-03")) as usize;
            idio[s][t] -= 0.35;
        }
    }

    let mut national = Vec::with_capacity(axis.len());
    let mut state_prices = vec![Vec::with_capacity(axis.len()); n_states];
    for t in 0..axis.len() {
        let means: Vec<f64> = (0..n_states).map(|s| env[t] + LEANS[s].2 + idio[s][t]).collect();
        national.push(elect.win_probability(&means));
        for s in 0..n_states {
            state_prices[s].push(gauss.cdf(means[s] / STATE_SD));
        }
    }

    // Market files.
    let obs_nat = Normal::new(0.0, 0.003).expect("sd");
    let mut text = String::from("date,price\n");
    for (t, day) in axis.iter().enumerate() {
        // Two interior days without a national quote.
        if *day == d("2024-05-19") || *day == d("2024-08-25") {
            continue;
        }
        let p = round3((national[t] + obs_nat.sample(&mut rng)).clamp(0.001, 0.999));
        writeln!(text, "{day},{p}").unwrap();
    }
    fs::write(out.join("markets").join(format!("{NATIONAL}.csv")), text).expect("write national");
    for (s, (code, _, _)) in LEANS.iter().enumerate() {
        let listed = if matches!(*code, "AZ" | "GA" | "NC" | "PA" | "MI" | "NV" | "WI") {
            d(MARKET_START)
        } else {
            d(MARKET_START).add_days(rng.random_range(0..75))
        };
        // Thin state markets trade with persistent pricing noise; the most
        // liquid ones track their fundamentals closely.
        let noise_sd = match *code {
            "PA" | "MI" => 0.004,
            "AZ" | "GA" | "NC" | "NV" | "WI" => 0.035,
            _ => 0.01,
        };
        let innov = Normal::new(0.0, noise_sd * (1.0f64 - 0.8 * 0.8).sqrt()).expect("sd");
        let mut noise = 0.0;
        let mut text = String::from("date,price\n");
        let swing = matches!(*code, "AZ" | "GA" | "NC" | "PA" | "MI" | "NV" | "WI");
        for (t, day) in axis.iter().enumerate() {
            noise = 0.8 * noise + innov.sample(&mut rng);
            let election_week = swing && *day >= d("2024-11-01");
            if *day < listed || (rng.random::<f64>() < 0.02 && !election_week) {
                continue;
            }
            // Overnight sell-off on 2024-11-03, deepest in the Midwest.
            let sell_off = match (*day == d("2024-11-03"), *code) {
                (false, _) => 0.0,
                (true, "MI" | "WI") => 0.09,
                (true, _) => 0.02,
            };
            let p = round3((state_prices[s][t] + noise - sell_off).clamp(0.001, 0.999));
            writeln!(text, "{day},{p}").unwrap();
        }
        fs::write(out.join("markets").join(format!("{code}.csv")), text).expect("write state");
    }

    write_polls(&out, &mut rng, &idio);

    fs::write(
        out.join("events.csv"),
        "date,label\n2024-07-13,assassination attempt\n2024-07-21,nominee change\n2024-09-10,presidential debate\n",
    )
    .expect("write events");
    fs::write(out.join("manifest.toml"), MANIFEST).expect("write manifest");
    eprintln!("fixture written to {}", out.display());
}

fn write_polls(out: &std::path::Path, rng: &mut ChaCha8Rng, idio: &[Vec<f64>]) {
    let pollsters: Vec<Pollster> = (1..=24)
        .map(|k| Pollster {
            name: format!("Pollster {k:02}"),
            house: rng.sample::<f64, _>(StandardNormal) * 0.008,
            decimals: k % 3 == 0,
        })
        .collect();
    let sampling = Normal::new(0.0, 0.014).expect("sd");
    let market_start = d(MARKET_START);
    let idio_of = |code: &str, t: DateStamp| {
        let s = LEANS.iter().position(|l| l.0 == code).expect("state");
        let i = (market_start.days_until(t) as usize).min(idio[s].len() - 1);
        idio[s][i]
    };

    // (state name, code, two-way mean before and after the nominee switch, daily rate)
    let mut venues: Vec<(String, String, f64, f64, f64)> = vec![("".into(), NATIONAL.into(), 0.489, 0.489, 3.0)];
    let swing = [("AZ", 0.497, 0.495), ("GA", 0.496, 0.494), ("NC", 0.495, 0.493), ("NV", 0.494, 0.491),
        ("PA", 0.494, 0.49), ("WI", 0.492, 0.488), ("MI", 0.491, 0.487)];
    for (code, before, after) in swing {
        venues.push((name_of(code).into(), code.into(), before, after, 0.9));
    }
    for (code, _, lean) in LEANS.iter() {
        if ["TX", "FL", "OH", "MN", "NH", "VA", "NY", "CA", "NM", "IA", "ME", "NE", "MT", "MO"].contains(code) {
            let base = (0.5 + lean * 0.0045).clamp(0.3, 0.7);
            venues.push((name_of(code).into(), code.to_string(), base + 0.004, base, 0.08));
        }
    }
    // Venues outside the jurisdiction list; ingestion drops them.
    for (name, base) in [("Maine CD-2", 0.53), ("Nebraska CD-2", 0.47), ("District of Columbia", 0.08)] {
        venues.push((name.into(), String::new(), base, base, 0.03));
    }

    let mut rows = String::from("poll_id,pollster,state,end_date,question_id,candidate_name,pct\n");
    let (mut poll_id, mut question_id) = (80000u32, 150000u32);
    for day in days(d(POLL_START), d(POLL_END)) {
        let switched = day >= d(NOMINEE_SWITCH);
        let opponent = if switched { "Kamala Harris" } else { "Joe Biden" };
        let ramp = if day >= d("2024-09-01") { 1.6 } else { 1.0 };
        for (state, code, before, after, rate) in &venues {
            // National volume is steady so the daily-mean noise is homoskedastic.
            let count = if code == NATIONAL {
                *rate as usize
            } else {
                Poisson::new(rate * ramp).expect("rate").sample(rng) as usize
            };
            for _ in 0..count {
                poll_id += 1;
                let p = &pollsters[rng.random_range(0..pollsters.len())];
                let name = if rng.random::<f64>() < 0.01 { "" } else { p.name.as_str() };
                let drift = if code.len() == 2 && code != NATIONAL { 0.01 * idio_of(code, day) } else { 0.0 };
                let two_way =
                    (if switched { *after } else { *before } + p.house + drift + sampling.sample(rng)).clamp(0.02, 0.98);
                let undecided = rng.random_range(3.0..9.0);
                let mut questions = vec![Vec::new()];
                if rng.random::<f64>() < 0.45 {
                    let kennedy = if day < d(THIRD_PARTY_EXIT) { rng.random_range(4.0..9.0) } else { 0.0 };
                    questions.push(vec![("Robert F. Kennedy", kennedy), ("Jill Stein", rng.random_range(0.5..2.0))]);
                }
                for others in questions {
                    question_id += 1;
                    let rest: f64 = others.iter().map(|o| o.1).sum();
                    let decided = 100.0 - undecided - rest;
                    let fmt = |v: f64| if p.decimals { format!("{:.1}", v) } else { format!("{}", v.round()) };
                    let mut cands = vec![("Donald Trump", two_way * decided), (opponent, (1.0 - two_way) * decided)];
                    cands.extend(others.into_iter().filter(|o| o.1 > 0.0));
                    for (cand, pct) in cands {
                        writeln!(
                            rows,
                            "{poll_id},{name},{state},{}/{}/{},{question_id},{cand},{}",
                            day.month(),
                            day.day(),
                            day.year() % 100,
                            fmt(pct)
                        )
                        .unwrap();
                    }
                }
            }
        }
    }
    fs::write(out.join("polls.csv"), rows).expect("write polls");
}

fn name_of(code: &str) -> &'static str {
    STATES.iter().find(|s| s.0 == code).expect("state code").1
}

const MANIFEST: &str = r#"# Reconstructed 2024 dataset; see README.
election = "2024-11-05"
events = "events.csv"

[window]
start = "2024-04-01"
end = "2024-11-05"

[market]
dir = "markets"

[polls]
path = "polls.csv"
normalization = "two-way"
"#;
