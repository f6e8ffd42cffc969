//! Brute-force oracles shared by the integration tests. None of these call
//! into the quadrature-based kernel.
#![allow(dead_code)]

pub mod thermal_oracle {
    use std::f64::consts::PI;

    pub const SECONDS_PER_YEAR: f64 = 8760.0 * 3600.0;
    pub const MONTH_SECONDS: f64 = 730.0 * 3600.0;

    /// Mean-over-depth response of a segmented line source with its
    /// negative image, by direct summation of point sources
    /// erfc(d/√(4αt)) / (4πλd) dz. Segments are shorter than r/4.
    pub fn point_source_fls(r: f64, depth: f64, seconds: f64, lambda: f64, alpha: f64) -> f64 {
        if seconds <= 0.0 {
            return 0.0;
        }
        let segments = ((depth / (r / 4.0)).ceil() as usize).max(400);
        let dz = depth / segments as f64;
        let scale = (4.0 * alpha * seconds).sqrt();
        let kernel = |d: f64| libm::erfc(d / scale) / d;
        let m = segments as i64;
        let mut total = 0.0;
        // real source: lag L = i - j, multiplicity M - |L|
        for lag in -(m - 1)..m {
            let d = (r * r + (lag as f64 * dz).powi(2)).sqrt();
            total += (m - lag.abs()) as f64 * kernel(d);
        }
        // image source: z + z' = (i + j + 1) dz, S = i + j + 1 in [1, 2M - 1]
        for s in 1..(2 * m) {
            let count = if s <= m { s } else { 2 * m - s };
            let d = (r * r + (s as f64 * dz).powi(2)).sqrt();
            total -= count as f64 * kernel(d);
        }
        total * dz / segments as f64 / (4.0 * PI * lambda)
    }

    /// Field term as the explicit double loop over borehole pairs.
    pub fn pairwise_field(
        boreholes: &[[f64; 2]],
        depth: f64,
        seconds: f64,
        lambda: f64,
        alpha: f64,
    ) -> f64 {
        let n = boreholes.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = ((boreholes[i][0] - boreholes[j][0]).powi(2)
                    + (boreholes[i][1] - boreholes[j][1]).powi(2))
                .sqrt();
                total += point_source_fls(d, depth, seconds, lambda, alpha);
            }
        }
        total / n as f64
    }

    /// Seasonal peak by pulse convolution: each month's load acts as a
    /// rectangular pulse g(t_end - t_k) - g(t_end - t_{k+1}).
    pub fn seasonal_convolution(r_b: f64, depth: f64, lambda: f64, alpha: f64) -> f64 {
        let months = 36;
        let g: Vec<f64> = (0..=months)
            .map(|k| point_source_fls(r_b, depth, k as f64 * MONTH_SECONDS, lambda, alpha))
            .collect();
        let load = |k: usize| (2.0 * PI * (k as f64 + 0.5) / 12.0).sin();
        let mut peak = 0.0_f64;
        for m in 24..months {
            let end = m + 1;
            let mut value = 0.0;
            for k in 0..end {
                value += load(k) * (g[end - k] - g[end - k - 1]);
            }
            peak = peak.max(value);
        }
        peak
    }

    pub fn grid(spacing: f64, rows: usize, cols: usize) -> Vec<[f64; 2]> {
        let mut out = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                out.push([j as f64 * spacing, i as f64 * spacing]);
            }
        }
        out
    }
}

/// Oracle values above, computed once at the reference ground
/// (λ 2.0, α 1e-6, r_b 0.06, 50 years) and frozen.
pub mod goldens {
    /// (H, R_LT)
    pub const LONG_TERM: [(f64, f64); 2] = [(50.0, 4.5275544996e-1), (200.0, 5.2234106073e-1)];
    /// (H, R_seas)
    pub const SEASONAL: [(f64, f64); 2] = [(50.0, 3.0663860386e-1), (200.0, 3.1111891350e-1)];
    /// (B, H, R_field) of a 3×3 grid
    pub const FIELD_3X3: [(f64, f64, f64); 6] = [
        (5.0, 50.0, 6.8001530214e-1),
        (25.0, 50.0, 1.0533812879e-1),
        (100.0, 50.0, 1.4819246219e-3),
        (5.0, 200.0, 1.1298518956e0),
        (25.0, 200.0, 2.8619327724e-1),
        (100.0, 200.0, 7.2046813515e-3),
    ];
}

/// Fluid temperatures written out from the resistances, without the
/// sizing module's weighting helpers.
pub mod sizing_oracle {
    pub struct Site {
        pub r_lt: f64,
        pub r_field: f64,
        pub r_seas: f64,
        pub rb: f64,
        pub t_g: f64,
        pub w_hdd: f64,
        pub t_m_heat: f64,
        pub w_cdd: f64,
        pub t_m_cool: f64,
        pub t_min: f64,
        pub t_max: f64,
    }

    impl Site {
        /// (heating, cooling) temperatures at the start and the end of life.
        pub fn temperatures(&self, q: f64, t_h: f64, t_c: f64, q_i: f64) -> [(f64, f64); 2] {
            let net = self.r_lt + self.r_field - self.r_seas;
            let seas_h = if self.t_m_heat > 0.0 { self.w_hdd * t_h / self.t_m_heat * self.r_seas } else { 0.0 };
            let seas_c = if self.t_m_cool > 0.0 { self.w_cdd * t_c / self.t_m_cool * self.r_seas } else { 0.0 };
            let mut out = [(0.0, 0.0); 2];
            for (k, frac) in [0.0, 1.0].into_iter().enumerate() {
                let lt_h = frac * t_h / 8760.0 * net;
                let lt_c = frac * t_c / 8760.0 * net;
                out[k] = (
                    self.t_g - q * (lt_h + seas_h + self.rb) + q_i * lt_c,
                    self.t_g + q_i * (lt_c + seas_c + self.rb) - q * lt_h,
                );
            }
            out
        }

        pub fn feasible(&self, q: f64, t_h: f64, t_c: f64, q_i: f64) -> bool {
            self.temperatures(q, t_h, t_c, q_i)
                .iter()
                .all(|&(h, c)| h >= self.t_min - 1e-9 && c <= self.t_max + 1e-9)
        }
    }
}

/// Exhaustive optima of small transportation problems.
pub mod flow_oracle {
    use std::collections::VecDeque;

    use gshp_core::allocation::TransportProblem;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn small_instance(rng: &mut ChaCha8Rng) -> TransportProblem {
        let total = rng.gen_range(2..=6);
        let ns = rng.gen_range(1..total);
        let nd = total - ns;
        let supply = (0..ns).map(|_| rng.gen_range(0..50)).collect();
        let demand = (0..nd).map(|_| rng.gen_range(0..50)).collect();
        let mut edges = Vec::new();
        for s in 0..ns {
            for d in 0..nd {
                if rng.gen_bool(0.5) {
                    edges.push((s, d));
                }
            }
        }
        TransportProblem { supply, demand, edges }
    }

    pub fn large_instance(n: usize, seed: u64) -> TransportProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ns = n / 2;
        let nd = n - ns;
        let supply = (0..ns).map(|_| rng.gen_range(0..5_000_000_000u64)).collect();
        let demand = (0..nd).map(|_| rng.gen_range(0..5_000_000_000u64)).collect();
        let mut edges = Vec::new();
        for s in 0..ns {
            // mostly local links so the graph splits into many components
            for _ in 0..rng.gen_range(0..4) {
                let d = (s + rng.gen_range(0..8)).min(nd - 1);
                edges.push((s, d));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        TransportProblem { supply, demand, edges }
    }

    /// Capacity and conservation checks, plus optimality: no augmenting path
    /// remains in the residual network.
    pub fn check_flow(p: &TransportProblem, flow: &[u64]) -> Result<(), String> {
        if flow.len() != p.edges.len() {
            return Err("one flow per edge expected".into());
        }
        let mut out = vec![0u64; p.supply.len()];
        let mut inn = vec![0u64; p.demand.len()];
        for (&(s, d), &f) in p.edges.iter().zip(flow) {
            out[s] += f;
            inn[d] += f;
        }
        if out.iter().zip(&p.supply).any(|(o, c)| o > c) {
            return Err("source over capacity".into());
        }
        if inn.iter().zip(&p.demand).any(|(i, c)| i > c) {
            return Err("demand over capacity".into());
        }
        let ns = p.supply.len();
        let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); ns + p.demand.len()];
        for (&(s, d), &f) in p.edges.iter().zip(flow) {
            adj[s].push((ns + d, true));
            if f > 0 {
                adj[ns + d].push((s, true));
            }
        }
        let mut seen = vec![false; adj.len()];
        let mut queue: VecDeque<usize> = (0..ns).filter(|&s| out[s] < p.supply[s]).collect();
        for &s in &queue {
            seen[s] = true;
        }
        while let Some(v) = queue.pop_front() {
            if v >= ns && inn[v - ns] < p.demand[v - ns] {
                return Err("augmenting path left".into());
            }
            for &(w, _) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        Ok(())
    }

    /// Max-flow value as the minimum cut: for every subset S of sources kept
    /// on the source side, cut the sources outside S and every demand
    /// adjacent to S.
    pub fn min_cut(supply: &[u64], demand: &[u64], edges: &[(usize, usize)]) -> u64 {
        let ns = supply.len();
        let mut best = u64::MAX;
        for mask in 0u32..(1 << ns) {
            let mut cut = 0;
            let mut touched = vec![false; demand.len()];
            for s in 0..ns {
                if mask & (1 << s) == 0 {
                    cut += supply[s];
                } else {
                    for &(a, d) in edges {
                        if a == s {
                            touched[d] = true;
                        }
                    }
                }
            }
            cut += demand.iter().zip(&touched).filter(|(_, &t)| t).map(|(d, _)| d).sum::<u64>();
            best = best.min(cut);
        }
        best
    }

    fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
            if a[pivot][col].abs() < 1e-9 {
                return None;
            }
            a.swap(col, pivot);
            b.swap(col, pivot);
            for row in 0..n {
                if row != col {
                    let f = a[row][col] / a[col][col];
                    if f != 0.0 {
                        for k in col..n {
                            a[row][k] -= f * a[col][k];
                        }
                        b[row] -= f * b[col];
                    }
                }
            }
        }
        Some((0..n).map(|i| b[i] / a[i][i]).collect())
    }

    /// LP optimum by enumerating every basic solution: each choice of
    /// |E| tight constraints among x_e ≥ 0, supply rows and demand rows.
    pub fn lp_vertices(supply: &[u64], demand: &[u64], edges: &[(usize, usize)]) -> f64 {
        let m = edges.len();
        if m == 0 {
            return 0.0;
        }
        // rows: -x_e ≤ 0, Σ_out x ≤ supply, Σ_in x ≤ demand
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for e in 0..m {
            let mut r = vec![0.0; m];
            r[e] = -1.0;
            rows.push((r, 0.0));
        }
        for (s, &cap) in supply.iter().enumerate() {
            rows.push(((0..m).map(|e| if edges[e].0 == s { 1.0 } else { 0.0 }).collect(), cap as f64));
        }
        for (d, &cap) in demand.iter().enumerate() {
            rows.push(((0..m).map(|e| if edges[e].1 == d { 1.0 } else { 0.0 }).collect(), cap as f64));
        }
        let mut best = 0.0_f64;
        let mut chosen = Vec::with_capacity(m);
        subsets(rows.len(), m, 0, &mut chosen, &mut |idx| {
            let a: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].0.clone()).collect();
            let b: Vec<f64> = idx.iter().map(|&i| rows[i].1).collect();
            if let Some(x) = solve_square(a, b) {
                let ok = rows
                    .iter()
                    .all(|(r, c)| r.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() <= c + 1e-6);
                if ok {
                    best = best.max(x.iter().sum());
                }
            }
        });
        best
    }

    fn subsets(n: usize, k: usize, start: usize, chosen: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if chosen.len() == k {
            f(chosen);
            return;
        }
        for i in start..n {
            if n - i < k - chosen.len() {
                break;
            }
            chosen.push(i);
            subsets(n, k, i + 1, chosen, f);
            chosen.pop();
        }
    }
}

/// Second implementation of the run statistics (Welford update).
pub mod stats_oracle {
    pub fn mean_and_half_width(values: &[f64]) -> (f64, f64) {
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (k, &v) in values.iter().enumerate() {
            let n = (k + 1) as f64;
            let delta = v - mean;
            mean += delta / n;
            m2 += delta * (v - mean);
        }
        let n = values.len() as f64;
        let sd = (m2 / (n - 1.0)).sqrt();
        (mean, 1.96 * sd / n.sqrt())
    }
}

/// Randomised sizing fixtures and the brute-force rate scan.
pub mod scan {
    use super::sizing_oracle::Site;
    use gshp_core::climate::DegreeDayProfile;
    use gshp_core::sizing::{self, FieldDesign, HpParams, SizingContext, DEPTHS, SPACINGS};
    use gshp_core::thermal::{self, GroundColumn};
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    const SCAN_POINTS: usize = 10_000;

    pub struct Fixture {
        pub design: FieldDesign,
        pub ctx: SizingContext,
        pub q_inj: f64,
    }

    pub fn site(f: &Fixture) -> Site {
        let r = f.design.resistances;
        let p = &f.ctx.profile;
        Site {
            r_lt: r.long_term,
            r_field: r.field,
            r_seas: r.seasonal,
            rb: f.ctx.ground.borehole_resistance,
            t_g: f.ctx.ground.surface_temperature + f.ctx.ground.gradient * f.design.depth / 2.0,
            w_hdd: p.w_hdd_max,
            t_m_heat: p.t_m_heat,
            w_cdd: p.w_cdd_max,
            t_m_cool: p.t_m_cool,
            t_min: f.ctx.hp.t_mf_min,
            t_max: f.ctx.hp.t_mf_max,
        }
    }

    pub fn fixture(rng: &mut ChaCha8Rng) -> Fixture {
        let ground = GroundColumn::reference().with_lambda(rng.gen_range(1.5..3.0));
        let b = SPACINGS[rng.gen_range(0..6)];
        let h = DEPTHS[rng.gen_range(0..DEPTHS.len())];
        let n = rng.gen_range(1..=6);
        let design = FieldDesign::evaluate(b, h, thermal::rectangular_grid(b, n, n), &ground, 50.0).unwrap();
        let ctx = SizingContext {
            ground,
            hp: HpParams::default(),
            profile: DegreeDayProfile::temperate(),
            t_nom: [1800.0, 1900.0, 2000.0][rng.gen_range(0..3)],
        };
        let cap = sizing::injection_capacity(&design, &ctx).unwrap();
        let q_inj = if rng.gen_bool(0.3) { 0.0 } else { cap * rng.gen_range(0.0..1.0) };
        Fixture { design, ctx, q_inj }
    }

    /// Largest feasible rate on a uniform grid of the nominal-hours line, and
    /// the grid step.
    pub fn scan(f: &Fixture) -> (Option<f64>, f64) {
        let s = site(f);
        let t_h = f.ctx.t_nom;
        let t_c = f.ctx.profile.cooling_hours();
        let q_i = if f.q_inj > 0.0 { f.q_inj / (f.design.total_length() * t_c) } else { 0.0 };
        let q_nom = f.ctx.ground.nominal_rate(f.design.depth).unwrap();
        // heating needs q·R_b ≤ T_g − T_min + q_i·R_net, weights are ≤ 1
        let net = s.r_lt + s.r_field - s.r_seas;
        let q_hi = (s.t_g - s.t_min + q_i * net.max(0.0)) / s.rb;
        let step = q_hi / SCAN_POINTS as f64;
        let best = (0..=SCAN_POINTS)
            .map(|k| k as f64 * step)
            .rfind(|&q| q >= 0.8 * q_nom && s.feasible(q, t_h, t_c, q_i));
        (best, step)
    }
}
