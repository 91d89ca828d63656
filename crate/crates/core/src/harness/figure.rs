//! Planar figure data: sampled values, line primitives, a membership grid and
//! a standalone SVG, all byte-stable for a given seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::format_g;
use crate::geometry::{l_vector_for_kernel, value_space_membership, Hyperplane};
use crate::instance::{Instance, InstanceKind};
use crate::mdp::{evaluate_policy, one_hot, Mdp, Policy};
use crate::rmdp::{robust_evaluate_policy, SRectangularSet, DEFAULT_COMBINATION_CAP};
use crate::robust_geometry::{conic_region, region_bounds, robust_space_membership};
use crate::sample::{rng, sample_simplex};

const EVAL_TOL: f64 = 1e-10;
const GRID_TOL: f64 = 1e-9;

/// Figure identifiers accepted by [`emit_figure_data`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig10,
    Fig11,
    Fig12,
}

/// What a figure draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    /// Values of policies agreeing with the instance policy at one state,
    /// with that row's hyperplanes or cone surface.
    Agreement,
    /// Values of random policies over the membership region, with the
    /// deterministic rows' hyperplanes or cone surfaces.
    ValueSpace,
    /// Inner bound, exact test and outer bound of the minus-side region.
    ExtraRegion,
    /// Value space plus a search for a segment that leaves the region from
    /// every candidate center.
    StarShape,
}

impl FigureId {
    pub const ALL: [FigureId; 10] = [
        FigureId::Fig2,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7,
        FigureId::Fig8,
        FigureId::Fig10,
        FigureId::Fig11,
        FigureId::Fig12,
    ];

    pub fn parse(name: &str) -> Option<FigureId> {
        serde_json::from_value(serde_json::Value::String(name.to_owned())).ok()
    }

    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .expect("unit variant")
    }

    pub fn kind(self) -> FigureKind {
        match self {
            FigureId::Fig2 | FigureId::Fig4 | FigureId::Fig5 | FigureId::Fig10 => {
                FigureKind::Agreement
            }
            FigureId::Fig3 | FigureId::Fig6 | FigureId::Fig7 | FigureId::Fig12 => {
                FigureKind::ValueSpace
            }
            FigureId::Fig8 => FigureKind::ExtraRegion,
            FigureId::Fig11 => FigureKind::StarShape,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FigureOptions {
    pub seed: u64,
    pub samples: usize,
    /// Membership grid resolution per axis.
    pub grid: usize,
    /// Grid resolution of the star-shape search.
    pub star_grid: usize,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            samples: 2000,
            grid: 400,
            star_grid: 200,
        }
    }
}

/// A segment whose endpoints are members and whose midpoint is not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarWitness {
    pub center: [f64; 2],
    pub target: [f64; 2],
    pub midpoint: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarSearch {
    /// Member grid points tried as centers.
    pub centers: usize,
    /// Centers from which every tried segment stayed inside.
    pub star_centers: Vec<[f64; 2]>,
    /// Witness for the member grid point nearest the members' centroid.
    pub witness: Option<StarWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSummary {
    pub figure: FigureId,
    pub kind: FigureKind,
    pub bounds: (f64, f64),
    pub points: usize,
    pub primitives: usize,
    pub grid_members: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub star: Option<StarSearch>,
    pub files: Vec<PathBuf>,
}

/// Line primitive; points use equal endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub kind: &'static str,
    pub state: usize,
    pub index: usize,
    pub from: [f64; 2],
    pub to: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCell {
    pub member: bool,
    /// Bit `s` set when the inner bound holds at state `s`.
    pub lower: u8,
    pub exact: u8,
    pub upper: u8,
}

/// Membership in the (robust) value space; the plain test for plain models.
pub fn is_member(inst: &Instance, u: &SRectangularSet, x: &[f64], tol: f64) -> Result<bool> {
    Ok(if inst.kind() == InstanceKind::Mdp {
        value_space_membership(&inst.mdp, x, tol)?.verdict
    } else {
        robust_space_membership(&inst.mdp, u, x, tol)?.verdict
    })
}

fn value_of(inst: &Instance, u: &SRectangularSet, pi: &Policy) -> Result<Vec<f64>> {
    Ok(if inst.kind() == InstanceKind::Mdp {
        evaluate_policy(&inst.mdp, pi)?.0
    } else {
        robust_evaluate_policy(&inst.mdp, u, pi, EVAL_TOL)?.value.0
    })
}

/// Row on a random face of the simplex: a vertex, an edge or the interior,
/// each a third of the time, so boundary values are sampled too.
fn face_row<R: Rng + ?Sized>(r: &mut R, n: usize) -> Vec<f64> {
    match r.random_range(0..3) {
        0 => one_hot(r.random_range(0..n), n),
        1 if n > 1 => {
            let a = r.random_range(0..n);
            let b = (a + 1 + r.random_range(0..n - 1)) % n;
            let t: f64 = r.random();
            let mut row = vec![0.0; n];
            row[a] = t;
            row[b] = 1.0 - t;
            row
        }
        _ => sample_simplex(r, n),
    }
}

/// Values of `n` random policies, with each policy drawn from its own seed.
pub fn sample_values(
    inst: &Instance,
    u: &SRectangularSet,
    fixed: &[(usize, Vec<f64>)],
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let (ns, na) = (inst.mdp.num_states(), inst.mdp.num_actions());
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(crate::sample::derive_seed(seed, i as u64));
            let mut rows: Vec<Vec<f64>> = (0..ns).map(|_| face_row(&mut r, na)).collect();
            for (s, row) in fixed {
                rows[*s] = row.clone();
            }
            value_of(inst, u, &Policy::new(rows)?)
        })
        .collect()
}

/// Segment of the line `<normal, x> = offset` inside `[lo, hi]^2`.
pub fn clip_line(normal: [f64; 2], offset: f64, lo: f64, hi: f64) -> Option<([f64; 2], [f64; 2])> {
    let [a, b] = normal;
    if a.abs() >= b.abs() {
        if a == 0.0 {
            return None;
        }
        // x as a function of y
        let p = [(offset - b * lo) / a, lo];
        let q = [(offset - b * hi) / a, hi];
        clip_segment(p, q, lo, hi)
    } else {
        let p = [lo, (offset - a * lo) / b];
        let q = [hi, (offset - a * hi) / b];
        clip_segment(p, q, lo, hi)
    }
}

/// Part of the ray `origin + t dir`, `t >= 0`, inside `[lo, hi]^2`.
pub fn clip_ray(origin: [f64; 2], dir: [f64; 2], lo: f64, hi: f64) -> Option<([f64; 2], [f64; 2])> {
    let len = 4.0 * (hi - lo).max(1.0) + (origin[0].abs() + origin[1].abs());
    let norm = dir[0].hypot(dir[1]);
    if norm == 0.0 {
        return None;
    }
    let far = [
        origin[0] + len * dir[0] / norm,
        origin[1] + len * dir[1] / norm,
    ];
    clip_segment(origin, far, lo, hi)
}

/// Liang-Barsky clipping of a segment to `[lo, hi]^2`.
fn clip_segment(p: [f64; 2], q: [f64; 2], lo: f64, hi: f64) -> Option<([f64; 2], [f64; 2])> {
    let d = [q[0] - p[0], q[1] - p[1]];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for i in 0..2 {
        for (pk, qk) in [(-d[i], p[i] - lo), (d[i], hi - p[i])] {
            if pk == 0.0 {
                if qk < 0.0 {
                    return None;
                }
            } else {
                let t = qk / pk;
                if pk < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
        }
    }
    if t0 > t1 {
        return None;
    }
    let at = |t: f64| [p[0] + t * d[0], p[1] + t * d[1]];
    Some((at(t0), at(t1)))
}

fn planar(m: &Mdp) -> Result<()> {
    if m.num_states() == 2 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: "states of a planar figure".into(),
            expected: 2,
            found: m.num_states(),
        })
    }
}

fn xy(v: &[f64]) -> [f64; 2] {
    [v[0], v[1]]
}

/// Hyperplane trace, or the two boundary rays of the cone when the row has
/// several candidate kernels.
fn row_primitives(
    m: &Mdp,
    u: &SRectangularSet,
    s: usize,
    pi_s: &[f64],
    index: usize,
    out: &mut Vec<Primitive>,
) -> Result<()> {
    let (lo, hi) = m.value_bounds();
    if u.candidates(s).len() == 1 {
        let l = l_vector_for_kernel(m, s, &u.candidates(s)[0], pi_s)?;
        if let Some((from, to)) = clip_line(xy(&l.normal), l.offset, lo, hi) {
            out.push(Primitive {
                kind: "hyperplane",
                state: s,
                index,
                from,
                to,
            });
        }
        return Ok(());
    }
    let region = conic_region(m, u, s, pi_s)?;
    let apex = xy(&region.apex);
    let scale = (hi - lo).max(1.0);
    for h in &region.hyperplanes {
        let Hyperplane { lvec } = h;
        let dir = [-lvec.normal[1], lvec.normal[0]];
        for sign in [1.0, -1.0] {
            let d = [sign * dir[0], sign * dir[1]];
            let probe = [apex[0] + 1e-3 * scale * d[0], apex[1] + 1e-3 * scale * d[1]];
            // the ray bounds the cone when no other hyperplane cuts it off
            if region.max_residual(&probe).1 <= 1e-9 * scale {
                if let Some((from, to)) = clip_ray(apex, d, lo, hi) {
                    out.push(Primitive {
                        kind: "ray",
                        state: s,
                        index,
                        from,
                        to,
                    });
                }
            }
        }
    }
    out.push(Primitive {
        kind: "apex",
        state: s,
        index,
        from: apex,
        to: apex,
    });
    Ok(())
}

/// Membership and bound masks at the cell centers of an `n x n` grid, row
/// by row from the bottom left.
pub fn membership_grid(inst: &Instance, u: &SRectangularSet, n: usize) -> Result<Vec<GridCell>> {
    let m = &inst.mdp;
    planar(m)?;
    let (lo, hi) = m.value_bounds();
    (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let x = grid_point(lo, hi, n, idx);
            let mut cell = GridCell {
                member: is_member(inst, u, &x, GRID_TOL)?,
                lower: 0,
                exact: 0,
                upper: 0,
            };
            for s in 0..2 {
                let b = region_bounds(m, u, &x, s, GRID_TOL)?;
                cell.lower |= u8::from(b.in_lower_bound) << s;
                cell.exact |= u8::from(b.in_exact) << s;
                cell.upper |= u8::from(b.in_upper_bound) << s;
            }
            Ok(cell)
        })
        .collect()
}

pub fn grid_point(lo: f64, hi: f64, n: usize, idx: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    let (i, j) = (idx % n, idx / n);
    vec![lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h]
}

/// Looks for centers of star-shapedness among the members of an `n x n` grid.
///
/// A member is ruled out as a center when the midpoint of its segment to
/// some other member fails the membership test. The region is not
/// star-shaped at grid resolution when every member is ruled out.
pub fn star_search(inst: &Instance, u: &SRectangularSet, n: usize) -> Result<StarSearch> {
    let m = &inst.mdp;
    planar(m)?;
    let (lo, hi) = m.value_bounds();
    let members: Vec<[f64; 2]> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let x = grid_point(lo, hi, n, idx);
            Ok(is_member(inst, u, &x, GRID_TOL)?.then(|| xy(&x)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let blocking = |c: &[f64; 2]| -> Result<Option<StarWitness>> {
        for t in &members {
            let mid = [(c[0] + t[0]) / 2.0, (c[1] + t[1]) / 2.0];
            if !is_member(inst, u, &mid, GRID_TOL)? {
                return Ok(Some(StarWitness {
                    center: *c,
                    target: *t,
                    midpoint: mid,
                }));
            }
        }
        Ok(None)
    };
    let found: Vec<Option<StarWitness>> =
        members.par_iter().map(blocking).collect::<Result<_>>()?;
    let star_centers = members
        .iter()
        .zip(&found)
        .filter(|(_, w)| w.is_none())
        .map(|(c, _)| *c)
        .collect();
    let witness = if members.is_empty() {
        None
    } else {
        let k = members.len() as f64;
        let g = members
            .iter()
            .fold([0.0, 0.0], |acc, p| [acc[0] + p[0] / k, acc[1] + p[1] / k]);
        let d = |p: &[f64; 2]| (p[0] - g[0]).hypot(p[1] - g[1]);
        let nearest = (0..members.len())
            .min_by(|&a, &b| d(&members[a]).total_cmp(&d(&members[b])))
            .expect("nonempty");
        found[nearest].clone()
    };
    Ok(StarSearch {
        centers: members.len(),
        star_centers,
        witness,
    })
}

fn g12(v: f64) -> String {
    format_g(v, 12)
}

fn write_points(path: &Path, points: &[Vec<f64>]) -> Result<()> {
    let mut s = String::from("v1,v2,policy_id\n");
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", g12(p[0]), g12(p[1]), i);
    }
    Ok(fs::write(path, s)?)
}

fn write_primitives(path: &Path, prims: &[Primitive]) -> Result<()> {
    let mut s = String::from("kind,state,index,x1,y1,x2,y2\n");
    for p in prims {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            p.kind,
            p.state,
            p.index,
            g12(p.from[0]),
            g12(p.from[1]),
            g12(p.to[0]),
            g12(p.to[1])
        );
    }
    Ok(fs::write(path, s)?)
}

fn write_grid(path: &Path, lo: f64, hi: f64, n: usize, grid: &[GridCell]) -> Result<()> {
    let mut s = String::with_capacity(grid.len() * 40);
    s.push_str("v1,v2,member,lower,exact,upper\n");
    for (idx, c) in grid.iter().enumerate() {
        let x = grid_point(lo, hi, n, idx);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            g12(x[0]),
            g12(x[1]),
            u8::from(c.member),
            c.lower,
            c.exact,
            c.upper
        );
    }
    Ok(fs::write(path, s)?)
}

const SVG_CELLS: usize = 100;

fn cell_fill(kind: FigureKind, c: &GridCell) -> Option<&'static str> {
    match kind {
        FigureKind::ExtraRegion => {
            let extra = c.exact & !c.lower;
            if extra != 0 {
                Some("#f4a261")
            } else if c.lower != 0 {
                Some("#a8dadc")
            } else if c.upper != 0 {
                Some("#eeeeee")
            } else {
                None
            }
        }
        _ => c.member.then_some("#dde7f3"),
    }
}

fn render_svg(
    kind: FigureKind,
    lo: f64,
    hi: f64,
    grid: &[GridCell],
    n: usize,
    points: &[Vec<f64>],
    prims: &[Primitive],
) -> String {
    let w = hi - lo;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="600" height="600" viewBox="{} {} {} {}">"#,
        g12(lo),
        g12(lo),
        g12(w),
        g12(w)
    );
    let _ = writeln!(s, r#"<g transform="matrix(1 0 0 -1 0 {})">"#, g12(lo + hi));
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="white" stroke="black" stroke-width="{}"/>"#,
        g12(lo),
        g12(lo),
        g12(w),
        g12(w),
        g12(w / 300.0)
    );
    // coarse cells: a cell is filled from the fine grid point nearest its center
    let cw = w / SVG_CELLS as f64;
    if n > 0 {
        for j in 0..SVG_CELLS {
            for i in 0..SVG_CELLS {
                let fi = ((i as f64 + 0.5) * n as f64 / SVG_CELLS as f64) as usize;
                let fj = ((j as f64 + 0.5) * n as f64 / SVG_CELLS as f64) as usize;
                if let Some(fill) = cell_fill(kind, &grid[fj.min(n - 1) * n + fi.min(n - 1)]) {
                    let _ = writeln!(
                        s,
                        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                        g12(lo + i as f64 * cw),
                        g12(lo + j as f64 * cw),
                        g12(cw),
                        g12(cw),
                        fill
                    );
                }
            }
        }
    }
    let stroke = g12(w / 400.0);
    for p in prims {
        match p.kind {
            "hyperplane" | "ray" => {
                let color = if p.state == 0 { "#1d3557" } else { "#e63946" };
                let _ = writeln!(
                    s,
                    r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="{}"/>"#,
                    g12(p.from[0]),
                    g12(p.from[1]),
                    g12(p.to[0]),
                    g12(p.to[1]),
                    color,
                    stroke
                );
            }
            "witness" => {
                let _ = writeln!(
                    s,
                    r##"<polyline points="{},{} {},{}" fill="none" stroke="#2a9d8f" stroke-width="{}"/>"##,
                    g12(p.from[0]),
                    g12(p.from[1]),
                    g12(p.to[0]),
                    g12(p.to[1]),
                    stroke
                );
            }
            _ => {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{}" cy="{}" r="{}" fill="black"/>"#,
                    g12(p.from[0]),
                    g12(p.from[1]),
                    g12(w / 150.0)
                );
            }
        }
    }
    let r = g12(w / 500.0);
    for p in points {
        let _ = writeln!(
            s,
            r##"<circle cx="{}" cy="{}" r="{}" fill="#457b9d" fill-opacity="0.6"/>"##,
            g12(p[0]),
            g12(p[1]),
            r
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// Writes `points.csv`, `primitives.csv`, `grid.csv` and `figure.svg` into
/// `out_dir`, which is created if needed.
pub fn emit_figure_data(
    inst: &Instance,
    figure: FigureId,
    out_dir: &Path,
    opts: &FigureOptions,
) -> Result<FigureSummary> {
    let m = &inst.mdp;
    planar(m)?;
    if opts.grid == 0 {
        return Err(Error::InvalidArgument(
            "grid resolution must be positive".into(),
        ));
    }
    let u = inst.s_rectangular(DEFAULT_COMBINATION_CAP)?;
    let (lo, hi) = m.value_bounds();
    let kind = figure.kind();
    let na = m.num_actions();
    let pi = inst
        .policy
        .clone()
        .unwrap_or_else(|| Policy::uniform(2, na));

    let mut points = Vec::new();
    let mut prims = Vec::new();
    match kind {
        FigureKind::Agreement => {
            let half = opts.samples / 2;
            for s in 0..2 {
                let n = if s == 0 { half } else { opts.samples - half };
                let fixed = [(s, pi.row(s).to_vec())];
                points.extend(sample_values(
                    inst,
                    &u,
                    &fixed,
                    n,
                    crate::sample::derive_seed(opts.seed, s as u64),
                )?);
                row_primitives(m, &u, s, pi.row(s), 0, &mut prims)?;
            }
            let v = value_of(inst, &u, &pi)?;
            prims.push(Primitive {
                kind: "point",
                state: 0,
                index: 0,
                from: xy(&v),
                to: xy(&v),
            });
        }
        FigureKind::ValueSpace | FigureKind::ExtraRegion | FigureKind::StarShape => {
            points = sample_values(inst, &u, &[], opts.samples, opts.seed)?;
            for s in 0..2 {
                for a in 0..na {
                    row_primitives(m, &u, s, &one_hot(a, na), a, &mut prims)?;
                }
            }
        }
    }

    let star = if kind == FigureKind::StarShape {
        let search = star_search(inst, &u, opts.star_grid)?;
        if let Some(w) = &search.witness {
            prims.push(Primitive {
                kind: "witness",
                state: 0,
                index: 0,
                from: w.center,
                to: w.target,
            });
            prims.push(Primitive {
                kind: "midpoint",
                state: 0,
                index: 0,
                from: w.midpoint,
                to: w.midpoint,
            });
        }
        Some(search)
    } else {
        None
    };

    let grid = membership_grid(inst, &u, opts.grid)?;
    fs::create_dir_all(out_dir)?;
    let files: Vec<PathBuf> = ["points.csv", "primitives.csv", "grid.csv", "figure.svg"]
        .iter()
        .map(|f| out_dir.join(f))
        .collect();
    write_points(&files[0], &points)?;
    write_primitives(&files[1], &prims)?;
    write_grid(&files[2], lo, hi, opts.grid, &grid)?;
    fs::write(
        &files[3],
        render_svg(kind, lo, hi, &grid, opts.grid, &points, &prims),
    )?;
    Ok(FigureSummary {
        figure,
        kind,
        bounds: (lo, hi),
        points: points.len(),
        primitives: prims.len(),
        grid_members: grid.iter().filter(|c| c.member).count(),
        star,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::rmdp::UncertaintySet;

    fn fig6() -> Instance {
        let (m, u) = builtin::fig6();
        Instance::with_uncertainty(&m, UncertaintySet::S(u))
            .unwrap()
            .with_policy(builtin::fig6_policy())
    }

    #[test]
    fn ids_round_trip() {
        for f in FigureId::ALL {
            assert_eq!(FigureId::parse(&f.name()), Some(f));
        }
        assert_eq!(FigureId::parse("fig9"), None);
    }

    #[test]
    fn clipping() {
        let (p, q) = clip_line([1.0, 1.0], 1.0, 0.0, 1.0).unwrap();
        assert_eq!((p, q), ([1.0, 0.0], [0.0, 1.0]));
        assert!(clip_line([1.0, 1.0], 3.0, 0.0, 1.0).is_none());
        let (p, q) = clip_line([0.0, 2.0], 1.0, 0.0, 1.0).unwrap();
        assert_eq!((p, q), ([0.0, 0.5], [1.0, 0.5]));
        let (p, q) = clip_ray([0.5, 0.5], [1.0, 0.0], 0.0, 1.0).unwrap();
        assert_eq!(p, [0.5, 0.5]);
        assert!((q[0] - 1.0).abs() < 1e-12 && q[1] == 0.5);
        assert!(clip_ray([2.0, 2.0], [1.0, 1.0], 0.0, 1.0).is_none());
    }

    #[test]
    fn three_states_are_rejected() {
        let inst = Instance::from_mdp(builtin::fig1b());
        let dir = tempfile::tempdir().unwrap();
        let err = emit_figure_data(&inst, FigureId::Fig3, dir.path(), &FigureOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn emission_is_byte_stable() {
        let inst = fig6();
        let opts = FigureOptions {
            samples: 200,
            grid: 50,
            ..FigureOptions::default()
        };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let sa = emit_figure_data(&inst, FigureId::Fig6, a.path(), &opts).unwrap();
        emit_figure_data(&inst, FigureId::Fig6, b.path(), &opts).unwrap();
        for f in &sa.files {
            let name = f.file_name().unwrap();
            assert_eq!(fs::read(f).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
        let svg = fs::read_to_string(a.path().join("figure.svg")).unwrap();
        assert!(svg.contains(r#"version="1.1""#));
        let grid = fs::read_to_string(a.path().join("grid.csv")).unwrap();
        assert_eq!(grid.lines().count(), 1 + 50 * 50);
    }

    #[test]
    fn cone_rays_start_at_the_apex() {
        let inst = fig6();
        let u = inst.s_rectangular(16).unwrap();
        let mut prims = Vec::new();
        row_primitives(&inst.mdp, &u, 0, &[0.8, 0.2], 0, &mut prims).unwrap();
        let apex = prims.iter().find(|p| p.kind == "apex").unwrap().from;
        let rays: Vec<_> = prims.iter().filter(|p| p.kind == "ray").collect();
        assert_eq!(rays.len(), 2);
        for r in rays {
            assert_eq!(r.from, apex);
        }
    }

    #[test]
    fn sampled_robust_values_lie_in_the_grid_region() {
        let inst = fig6();
        let u = inst.s_rectangular(16).unwrap();
        for v in sample_values(&inst, &u, &[], 300, 3).unwrap() {
            assert!(
                robust_space_membership(&inst.mdp, &u, &v, 1e-8)
                    .unwrap()
                    .verdict
            );
        }
    }

    #[test]
    fn counterexample_has_no_star_center() {
        let (m, u) = builtin::fig11b();
        let inst = Instance::with_uncertainty(&m, UncertaintySet::S(u)).unwrap();
        let u = inst.s_rectangular(16).unwrap();
        let search = star_search(&inst, &u, 100).unwrap();
        assert!(search.centers > 0);
        assert!(search.star_centers.is_empty());
        let w = search.witness.unwrap();
        assert!(is_member(&inst, &u, &w.center, GRID_TOL).unwrap());
        assert!(is_member(&inst, &u, &w.target, GRID_TOL).unwrap());
        assert!(!is_member(&inst, &u, &w.midpoint, GRID_TOL).unwrap());
    }

    #[test]
    fn star_shaped_instance_keeps_centers() {
        let inst = fig6();
        let u = inst.s_rectangular(16).unwrap();
        assert!(!star_search(&inst, &u, 60).unwrap().star_centers.is_empty());
    }
}
