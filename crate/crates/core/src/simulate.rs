//! Panel simulator for staggered adoption with binary time-varying covariates
//! and three correlated unit-level confounders.
//!
//! Every unit is simulated twice from the same draws: once as observed, once
//! with its treatment path forced to zero. The second track gives untreated
//! potential outcomes for oracle effects.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Group value of units never treated in the panel.
pub const NEVER: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    /// Number of periods, 0..T-1.
    #[serde(rename = "T")]
    pub periods: u32,
    pub rho: f64,
    pub beta_xd: f64,
    pub seed: u64,
    /// Switch off every channel from treatment: outcome effect and feedback.
    pub zero_effect: bool,
    /// Keep the direct covariate term in the outcome equation.
    pub xy_effect: bool,
    pub keep_latents: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 100_000,
            periods: 6,
            rho: 0.9,
            beta_xd: 0.0,
            seed: 0,
            zero_effect: false,
            xy_effect: true,
            keep_latents: false,
        }
    }
}

const SD_X: f64 = 1.5;
const SD_D: f64 = 1.5;
const SD_Y: f64 = 0.1;

/// Lower Cholesky factor of the equicorrelation matrix.
fn cholesky(rho: f64) -> Result<[[f64; 3]; 3]> {
    let s = [[1.0, rho, rho], [rho, 1.0, rho], [rho, rho, 1.0]];
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let dot: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = s[i][i] - dot;
                if !(v > 1e-12) {
                    return Err(Error::Config(format!(
                        "latent covariance with rho={rho} is not positive definite"
                    )));
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = (s[i][j] - dot) / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Unit-level confounders (u_dy, u_xd, u_xy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latents {
    pub u_dy: f64,
    pub u_xd: f64,
    pub u_xy: f64,
}

/// Long panel stored column-wise, unit-major: entry `i * T + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub n: usize,
    pub periods: u32,
    pub x: Vec<u8>,
    pub d: Vec<u8>,
    pub y: Vec<f64>,
    /// Untreated potential outcomes; absent for panels read without them.
    pub y0: Option<Vec<f64>>,
    /// Covariate path with treatment forced to zero.
    pub x0: Option<Vec<u8>>,
    /// First treatment period per unit, [`NEVER`] if untreated.
    pub group: Vec<u32>,
    pub latents: Option<Vec<Latents>>,
}

/// Draw slots: 0 holds the latents, 1 + t the draws of period t.
fn slot_rng(rng: &mut ChaCha8Rng, slot: u64) -> &mut ChaCha8Rng {
    rng.set_word_pos((slot as u128) << 10);
    rng
}

pub fn simulate_panel(cfg: &SimConfig) -> Result<Panel> {
    if cfg.n == 0 {
        return Err(Error::Config("need at least one unit".into()));
    }
    if cfg.periods < 2 {
        return Err(Error::Config(format!("need T >= 2, got {}", cfg.periods)));
    }
    let l = cholesky(cfg.rho)?;
    let tn = cfg.periods as usize;
    let len = cfg.n * tn;
    let mut p = Panel {
        n: cfg.n,
        periods: cfg.periods,
        x: Vec::with_capacity(len),
        d: Vec::with_capacity(len),
        y: Vec::with_capacity(len),
        y0: Some(Vec::with_capacity(len)),
        x0: Some(Vec::with_capacity(len)),
        group: Vec::with_capacity(cfg.n),
        latents: cfg.keep_latents.then(|| Vec::with_capacity(cfg.n)),
    };
    let beta = if cfg.zero_effect { 0.0 } else { cfg.beta_xd };
    let y0s = p.y0.as_mut().expect("set above");
    let x0s = p.x0.as_mut().expect("set above");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.n {
        rng.set_stream(i as u64);
        let r = slot_rng(&mut rng, 0);
        let z: [f64; 3] = [r.sample(StandardNormal), r.sample(StandardNormal), r.sample(StandardNormal)];
        let u = |k: usize| (0..=k).map(|j| l[k][j] * z[j]).sum::<f64>();
        let lat = Latents { u_dy: u(0), u_xd: u(1), u_xy: u(2) };
        let Latents { u_dy, u_xd, u_xy } = lat;

        let (mut xp, mut xp0, mut dp) = (0.0, 0.0, 0u8);
        let mut group = NEVER;
        for t in 0..cfg.periods {
            let r = slot_rng(&mut rng, 1 + t as u64);
            let ex: f64 = r.sample::<f64, _>(StandardNormal) * SD_X;
            let ed: f64 = r.sample::<f64, _>(StandardNormal) * SD_D;
            let ey: f64 = r.sample::<f64, _>(StandardNormal) * SD_Y;
            let tf = t as f64;
            let base = 0.3 * u_xd + 0.3 * u_xy;
            let (x, x0) = if t == 0 {
                let v = (base + ex > 0.0) as u8;
                (v, v)
            } else {
                (
                    (base + 0.1 * (xp - 0.6) + beta * dp as f64 + ex > 0.0) as u8,
                    (base + 0.1 * (xp0 - 0.6) + ex > 0.0) as u8,
                )
            };
            let d = if t == 0 || dp == 1 {
                dp
            } else {
                let v = u_dy + u_xd + 0.15 * tf * (xp - 0.6) + 0.35 * tf * (x as f64 - 0.6) + ed;
                (v > 0.7 - 0.3 * tf) as u8
            };
            if d == 1 && group == NEVER {
                group = t;
            }
            let level = |x: u8| {
                let xy = if cfg.xy_effect { (0.5 + 0.1 * tf) * x as f64 } else { 0.0 };
                0.6 * tf.sqrt() + u_dy + 0.8 * u_xy + xy + ey
            };
            let effect = if cfg.zero_effect {
                0.0
            } else {
                0.2 + 0.2 * tf * u_dy + 0.05 * u_xy * x as f64
            };
            p.x.push(x);
            p.d.push(d);
            p.y.push(level(x) + d as f64 * effect);
            x0s.push(x0);
            y0s.push(level(x0));
            xp = x as f64;
            xp0 = x0 as f64;
            dp = d;
        }
        p.group.push(group);
        if let Some(ls) = p.latents.as_mut() {
            ls.push(lat);
        }
    }
    Ok(p)
}

impl Panel {
    #[inline]
    pub fn at(&self, i: usize, t: u32) -> usize {
        i * self.periods as usize + t as usize
    }

    pub fn group_size(&self, g: u32) -> usize {
        self.group.iter().filter(|&&x| x == g).count()
    }

    /// Mean of y_t - y0_t over units first treated in `g`.
    pub fn oracle_att(&self, g: u32, t: u32) -> Result<f64> {
        let y0 = self
            .y0
            .as_ref()
            .ok_or_else(|| Error::Estimate("panel carries no untreated outcomes".into()))?;
        if t >= self.periods {
            return Err(Error::InvalidTarget(format!("period {t} outside 0..{}", self.periods)));
        }
        let (mut s, mut k) = (0.0, 0usize);
        for i in (0..self.n).filter(|&i| self.group[i] == g) {
            let j = self.at(i, t);
            s += self.y[j] - y0[j];
            k += 1;
        }
        if k == 0 {
            return Err(Error::Estimate(format!("no units in group {g}")));
        }
        Ok(s / k as f64)
    }

    /// The same panel with observed outcomes replaced by the untreated track
    /// and everyone untreated. Used to test untreated-outcome independencies.
    pub fn untreated_track(&self) -> Result<Panel> {
        let (Some(y0), Some(x0)) = (&self.y0, &self.x0) else {
            return Err(Error::Estimate("panel carries no untreated track".into()));
        };
        Ok(Panel {
            x: x0.clone(),
            y: y0.clone(),
            ..self.clone()
        })
    }

    pub fn write_csv<W: Write>(&self, w: W, with_latents: bool) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["id", "t", "x", "d", "y", "y0", "group"];
        let lat = if with_latents { self.latents.as_ref() } else { None };
        if lat.is_some() {
            header.extend(["u_dy", "u_xd", "u_xy"]);
        }
        wr.write_record(&header).map_err(io)?;
        for i in 0..self.n {
            let g = match self.group[i] {
                NEVER => "inf".to_string(),
                g => g.to_string(),
            };
            for t in 0..self.periods {
                let j = self.at(i, t);
                let mut rec = vec![
                    i.to_string(),
                    t.to_string(),
                    self.x[j].to_string(),
                    self.d[j].to_string(),
                    self.y[j].to_string(),
                    self.y0.as_ref().map_or(String::new(), |v| v[j].to_string()),
                    g.clone(),
                ];
                if let Some(l) = lat {
                    rec.extend([l[i].u_dy, l[i].u_xd, l[i].u_xy].map(|v| v.to_string()));
                }
                wr.write_record(&rec).map_err(io)?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Read a long panel. Rows may come in any order but must form a balanced
    /// panel over periods 0..T-1; treatment paths must be monotone, and a
    /// `group` column, if present, must agree with them.
    pub fn read_csv<R: Read>(r: R) -> Result<Panel> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let need = |name: &str| col(name).ok_or_else(|| Error::Io(format!("missing column `{name}`")));
        let (ci, ct, cx, cd, cy) = (need("id")?, need("t")?, need("x")?, need("d")?, need("y")?);
        let (cy0, cg) = (col("y0"), col("group"));

        struct Row {
            id: String,
            t: u32,
            x: u8,
            d: u8,
            y: f64,
            y0: Option<f64>,
            group: Option<u32>,
        }
        let mut rows = Vec::new();
        for (k, rec) in rd.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
            let field = |c: usize| rec.get(c).unwrap_or("").trim();
            let bad = |c: usize| Error::Io(format!("line {line}: bad value `{}` in column `{}`", field(c), &headers[c]));
            let bin = |c: usize| match field(c) {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                _ => Err(bad(c)),
            };
            let num = |c: usize| field(c).parse::<f64>().map_err(|_| bad(c));
            rows.push(Row {
                id: field(ci).to_string(),
                t: field(ct).parse().map_err(|_| bad(ct))?,
                x: bin(cx)?,
                d: bin(cd)?,
                y: num(cy)?,
                y0: match cy0.map(field) {
                    None | Some("") => None,
                    Some(_) => Some(num(cy0.unwrap())?),
                },
                group: match cg.map(field) {
                    None | Some("") => None,
                    Some("inf") | Some("Inf") | Some("never") => Some(NEVER),
                    Some(v) => Some(v.parse().map_err(|_| bad(cg.unwrap()))?),
                },
            });
        }
        if rows.is_empty() {
            return Err(Error::Io("panel has no rows".into()));
        }
        let periods = rows.iter().map(|r| r.t).max().unwrap() + 1;
        let mut ids: Vec<&str> = rows.iter().map(|r| r.id.as_str()).collect();
        ids.sort_by(|a, b| match (a.parse::<u64>(), b.parse::<u64>()) {
            (Ok(x), Ok(y)) => x.cmp(&y),
            _ => a.cmp(b),
        });
        ids.dedup();
        let pos: std::collections::HashMap<&str, usize> = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
        let n = ids.len();
        let tn = periods as usize;
        if rows.len() != n * tn {
            return Err(Error::Io(format!(
                "unbalanced panel: {} rows for {n} units and {periods} periods",
                rows.len()
            )));
        }
        let all_y0 = rows.iter().all(|r| r.y0.is_some());
        let mut p = Panel {
            n,
            periods,
            x: vec![0; n * tn],
            d: vec![0; n * tn],
            y: vec![0.0; n * tn],
            y0: all_y0.then(|| vec![0.0; n * tn]),
            x0: None,
            group: vec![NEVER; n],
            latents: None,
        };
        let mut seen = vec![false; n * tn];
        let mut given: Vec<Option<u32>> = vec![None; n];
        for r in &rows {
            let j = pos[r.id.as_str()] * tn + r.t as usize;
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::Io(format!("duplicate row for unit `{}` period {}", r.id, r.t)));
            }
            p.x[j] = r.x;
            p.d[j] = r.d;
            p.y[j] = r.y;
            if let (Some(v), Some(y0)) = (p.y0.as_mut(), r.y0) {
                v[j] = y0;
            }
            given[pos[r.id.as_str()]] = r.group.or(given[pos[r.id.as_str()]]);
        }
        for i in 0..n {
            let path = &p.d[i * tn..(i + 1) * tn];
            if path.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Io(format!("unit `{}`: treatment path is not monotone", ids[i])));
            }
            p.group[i] = path.iter().position(|&v| v == 1).map_or(NEVER, |t| t as u32);
            if let Some(g) = given[i] {
                if g != p.group[i] {
                    return Err(Error::Io(format!(
                        "unit `{}`: group column disagrees with the treatment path",
                        ids[i]
                    )));
                }
            }
        }
        Ok(p)
    }
}

/// Simulate and return the oracle effect for `(g, t)`.
pub fn oracle_att(cfg: &SimConfig, g: u32, t: u32) -> Result<f64> {
    simulate_panel(cfg)?.oracle_att(g, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> SimConfig {
        SimConfig { n, seed: 7, ..Default::default() }
    }

    #[test]
    fn deterministic() {
        let a = simulate_panel(&cfg(500)).unwrap();
        let b = simulate_panel(&cfg(500)).unwrap();
        assert_eq!(a, b);
        let c = simulate_panel(&SimConfig { seed: 8, ..cfg(500) }).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn prefix_stable() {
        // unit i only depends on (seed, i)
        let a = simulate_panel(&cfg(50)).unwrap();
        let b = simulate_panel(&cfg(100)).unwrap();
        assert_eq!(a.y[..], b.y[..a.y.len()]);
    }

    #[test]
    fn staggered_and_consistent() {
        let p = simulate_panel(&SimConfig { beta_xd: 0.5, ..cfg(5000) }).unwrap();
        let y0 = p.y0.as_ref().unwrap();
        for i in 0..p.n {
            let mut prev = 0;
            for t in 0..p.periods {
                let j = p.at(i, t);
                assert!(p.d[j] >= prev);
                prev = p.d[j];
                if p.d[j] == 0 {
                    assert_eq!(p.y[j], y0[j]);
                }
            }
            let first = (0..p.periods).find(|&t| p.d[p.at(i, t)] == 1).unwrap_or(NEVER);
            assert_eq!(p.group[i], first);
        }
        assert_eq!(p.group_size(0), 0);
    }

    #[test]
    fn zero_effect_is_identity() {
        let p = simulate_panel(&SimConfig { zero_effect: true, beta_xd: 0.5, ..cfg(2000) }).unwrap();
        assert_eq!(&p.y, p.y0.as_ref().unwrap());
    }

    #[test]
    fn no_feedback_keeps_covariates() {
        let p = simulate_panel(&cfg(2000)).unwrap();
        assert_eq!(&p.x, p.x0.as_ref().unwrap());
    }

    #[test]
    fn untreated_track_ignores_feedback() {
        let a = simulate_panel(&cfg(1000)).unwrap();
        let b = simulate_panel(&SimConfig { beta_xd: 0.5, ..cfg(1000) }).unwrap();
        assert_eq!(a.y0, b.y0);
        assert_eq!(a.x0, b.x0);
    }

    #[test]
    fn rejects_bad_rho() {
        for rho in [-0.5, 1.0, 1.2] {
            assert!(simulate_panel(&SimConfig { rho, ..cfg(10) }).is_err());
        }
        assert!(simulate_panel(&SimConfig { rho: -0.4, ..cfg(10) }).is_ok());
    }

    #[test]
    fn csv_round_trip() {
        let p = simulate_panel(&cfg(40)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf, false).unwrap();
        let q = Panel::read_csv(buf.as_slice()).unwrap();
        assert_eq!(q.x, p.x);
        assert_eq!(q.d, p.d);
        assert_eq!(q.y, p.y);
        assert_eq!(q.y0, p.y0);
        assert_eq!(q.group, p.group);
    }

    #[test]
    fn csv_rejects_bad_paths() {
        let text = "id,t,x,d,y\n0,0,0,1,1.0\n0,1,0,0,1.0\n";
        assert!(Panel::read_csv(text.as_bytes()).is_err());
        let text = "id,t,x,d,y,group\n0,0,0,0,1.0,1\n0,1,0,0,1.0,1\n";
        assert!(Panel::read_csv(text.as_bytes()).is_err());
        let text = "id,t,x,d,y\n0,0,0,0,1.0\n";
        assert_eq!(Panel::read_csv(text.as_bytes()).unwrap().group, vec![NEVER]);
    }

    #[test]
    fn latent_moments() {
        let p = simulate_panel(&SimConfig { keep_latents: true, ..cfg(200_000) }).unwrap();
        let l = p.latents.as_ref().unwrap();
        let n = l.len() as f64;
        let m = |f: &dyn Fn(&Latents) -> f64| l.iter().map(f).sum::<f64>() / n;
        let (a, b) = (m(&|v| v.u_dy), m(&|v| v.u_xy));
        let cov = m(&|v| v.u_dy * v.u_xy) - a * b;
        let sa = (m(&|v| v.u_dy * v.u_dy) - a * a).sqrt();
        let sb = (m(&|v| v.u_xy * v.u_xy) - b * b).sqrt();
        assert!((cov / (sa * sb) - 0.9).abs() < 0.01);
        let x0 = (0..p.n).map(|i| p.x[p.at(i, 0)] as f64).sum::<f64>() / n;
        assert!((x0 - 0.5).abs() < 0.005, "{x0}");
    }
}
