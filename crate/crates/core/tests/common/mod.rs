#![allow(clippy::needless_range_loop)]

//! Brute-force oracles shared by the integration suites.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use fdqn::gridworld::{Cell, CellState, OccupancyGrid};
use fdqn::neural::{NetworkParams, Topology};
use rand::Rng;

pub const HOUSE_MAP: &str = include_str!("../../data/house.map");
pub const HOUSE_DATASET: &str = include_str!("../../data/house_dataset.txt");

pub fn random_grid<R: Rng>(rng: &mut R, w: usize, h: usize, p_unknown: f64, p_occupied: f64) -> OccupancyGrid {
    let cells = (0..w * h)
        .map(|_| {
            let u: f64 = rng.gen();
            if u < p_unknown {
                CellState::Unknown
            } else if u < p_unknown + p_occupied {
                CellState::Occupied
            } else {
                CellState::Free
            }
        })
        .collect();
    OccupancyGrid::from_cells(w, h, cells).unwrap()
}

pub fn brute_frontiers(map: &OccupancyGrid) -> BTreeSet<Cell> {
    let (w, h) = map.dims();
    let at = |x: i64, y: i64| map.cells()[y as usize * w + x as usize];
    let mut out = BTreeSet::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if at(x, y) != CellState::Free {
                continue;
            }
            let mut unknown_nb = false;
            for ny in y - 1..=y + 1 {
                for nx in x - 1..=x + 1 {
                    if (nx, ny) != (x, y)
                        && nx >= 0
                        && ny >= 0
                        && nx < w as i64
                        && ny < h as i64
                        && at(nx, ny) == CellState::Unknown
                    {
                        unknown_nb = true;
                    }
                }
            }
            if unknown_nb {
                out.insert(Cell::new(x as usize, y as usize));
            }
        }
    }
    out
}

/// Unknown fraction over every grid cell inside the closed disc.
pub fn brute_gain(map: &OccupancyGrid, center: (f64, f64), radius: usize) -> f64 {
    let r2 = (radius * radius) as f64;
    let (mut total, mut unknown) = (0u32, 0u32);
    for c in map.coords() {
        let dx = c.x as f64 - center.0;
        let dy = c.y as f64 - center.1;
        if dx * dx + dy * dy <= r2 {
            total += 1;
            unknown += u32::from(map.get(c) == CellState::Unknown);
        }
    }
    if total == 0 {
        0.0
    } else {
        f64::from(unknown) / f64::from(total)
    }
}

/// 8-connected components by union-find, each sorted row-major.
pub fn brute_components(cells: &BTreeSet<Cell>) -> Vec<Vec<Cell>> {
    let list: Vec<Cell> = cells.iter().copied().collect();
    let mut parent: Vec<usize> = (0..list.len()).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..list.len() {
        for j in i + 1..list.len() {
            let (a, b) = (list[i], list[j]);
            if a.x.abs_diff(b.x) <= 1 && a.y.abs_diff(b.y) <= 1 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<Cell>> = Default::default();
    for i in 0..list.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(list[i]);
    }
    let mut out: Vec<Vec<Cell>> = groups.into_values().collect();
    out.iter_mut().for_each(|g| g.sort());
    out.sort();
    out
}

/// Member closest to the mean; ties to the lowest row, then column.
pub fn brute_centroid(cells: &[Cell]) -> Cell {
    let n = cells.len() as f64;
    let mx = cells.iter().map(|c| c.x as f64).sum::<f64>() / n;
    let my = cells.iter().map(|c| c.y as f64).sum::<f64>() / n;
    let mut best = cells[0];
    let mut best_d = f64::INFINITY;
    for &c in cells {
        let d = (c.x as f64 - mx).powi(2) + (c.y as f64 - my).powi(2);
        if d < best_d || (d == best_d && (c.y, c.x) < (best.y, best.x)) {
            best = c;
            best_d = d;
        }
    }
    best
}

/// 4-connected step distance through Free cells, if any.
pub fn bfs_distance(map: &OccupancyGrid, from: Cell, to: Cell) -> Option<usize> {
    let (w, h) = map.dims();
    let free = |c: Cell| map.get(c) == CellState::Free;
    if !free(from) || !free(to) {
        return None;
    }
    let mut dist = vec![usize::MAX; w * h];
    dist[from.y * w + from.x] = 0;
    let mut q = VecDeque::from([from]);
    while let Some(c) = q.pop_front() {
        if c == to {
            return Some(dist[c.y * w + c.x]);
        }
        let d = dist[c.y * w + c.x];
        let mut nbs = Vec::new();
        if c.x > 0 {
            nbs.push(Cell::new(c.x - 1, c.y));
        }
        if c.y > 0 {
            nbs.push(Cell::new(c.x, c.y - 1));
        }
        if c.x + 1 < w {
            nbs.push(Cell::new(c.x + 1, c.y));
        }
        if c.y + 1 < h {
            nbs.push(Cell::new(c.x, c.y + 1));
        }
        for n in nbs {
            if free(n) && dist[n.y * w + n.x] == usize::MAX {
                dist[n.y * w + n.x] = d + 1;
                q.push_back(n);
            }
        }
    }
    None
}

/// Plain re-implementation of the Q-network forward pass, used to check the
/// library's forward and to take finite differences cheaply.
pub struct OracleNet {
    pub topology: Topology,
    /// `w[layer][out][in]`.
    pub w: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
}

/// Pre-activations of every layer for one input.
#[derive(Clone)]
pub struct Activations {
    pub input: Vec<f64>,
    pub z: Vec<Vec<f64>>,
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn affine(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter()
        .zip(b)
        .map(|(row, bias)| {
            let mut s = 0.0;
            for (a, v) in row.iter().zip(x) {
                s += a * v;
            }
            s + bias
        })
        .collect()
}

fn relus(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| relu(v)).collect()
}

fn dueling_q(v: f64, a: &[f64]) -> Vec<f64> {
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    a.iter().map(|x| v + x - mean).collect()
}

impl OracleNet {
    pub fn from_params(p: &NetworkParams) -> Self {
        let mut w = Vec::new();
        let mut b = Vec::new();
        for l in p.layers() {
            w.push(l.weights.chunks(l.inputs).map(|r| r.to_vec()).collect());
            b.push(l.bias.clone());
        }
        OracleNet {
            topology: p.topology(),
            w,
            b,
        }
    }

    pub fn activations(&self, x: &[f64]) -> Activations {
        let (w, b) = (&self.w, &self.b);
        let z = match self.topology {
            Topology::Standard => {
                let z0 = affine(&w[0], &b[0], x);
                let z1 = affine(&w[1], &b[1], &relus(&z0));
                let z2 = affine(&w[2], &b[2], &relus(&z1));
                vec![z0, z1, z2]
            }
            Topology::Dueling => {
                let z0 = affine(&w[0], &b[0], x);
                let f = relus(&z0);
                let z1 = affine(&w[1], &b[1], &f);
                let z2 = affine(&w[2], &b[2], &relus(&z1));
                let z3 = affine(&w[3], &b[3], &f);
                let z4 = affine(&w[4], &b[4], &relus(&z3));
                vec![z0, z1, z2, z3, z4]
            }
        };
        Activations { input: x.to_vec(), z }
    }

    pub fn q(&self, act: &Activations) -> Vec<f64> {
        match self.topology {
            Topology::Standard => act.z[2].clone(),
            Topology::Dueling => dueling_q(act.z[2][0], &act.z[4]),
        }
    }

    /// Input vector feeding layer `k`.
    pub fn layer_input(&self, act: &Activations, k: usize) -> Vec<f64> {
        let parent = match (self.topology, k) {
            (_, 0) => return act.input.clone(),
            (Topology::Standard, k) => k - 1,
            (Topology::Dueling, 1 | 3) => 0,
            (Topology::Dueling, 2) => 1,
            (Topology::Dueling, 4) => 3,
            _ => unreachable!(),
        };
        relus(&act.z[parent])
    }

    fn is_output(&self, k: usize) -> bool {
        matches!((self.topology, k), (Topology::Standard, 2) | (Topology::Dueling, 2 | 4))
    }

    /// Q after replacing pre-activation `z[k][o]` by `new_z`, updating only
    /// what depends on it. The flag reports a ReLU changing side anywhere.
    pub fn q_with_unit(&self, act: &Activations, k: usize, o: usize, new_z: f64) -> (Vec<f64>, bool) {
        let old = act.z[k][o];
        let mut kink = !self.is_output(k) && ((old > 0.0) != (new_z > 0.0));
        let dh = if self.is_output(k) {
            0.0
        } else {
            relu(new_z) - relu(old)
        };
        let bump = |layer: usize, z: &[f64]| -> Vec<f64> {
            z.iter()
                .enumerate()
                .map(|(j, v)| v + self.w[layer][j][o] * dh)
                .collect()
        };
        let side_changed = |a: &[f64], b: &[f64]| a.iter().zip(b).any(|(x, y)| (*x > 0.0) != (*y > 0.0));
        let q = match (self.topology, k) {
            (Topology::Standard, 2) => {
                let mut q = act.z[2].clone();
                q[o] = new_z;
                q
            }
            (Topology::Standard, 1) => bump(2, &act.z[2]),
            (Topology::Standard, 0) => {
                let z1 = bump(1, &act.z[1]);
                kink |= side_changed(&z1, &act.z[1]);
                affine(&self.w[2], &self.b[2], &relus(&z1))
            }
            (Topology::Dueling, 4) => {
                let mut a = act.z[4].clone();
                a[o] = new_z;
                dueling_q(act.z[2][0], &a)
            }
            (Topology::Dueling, 3) => dueling_q(act.z[2][0], &bump(4, &act.z[4])),
            (Topology::Dueling, 2) => dueling_q(new_z, &act.z[4]),
            (Topology::Dueling, 1) => dueling_q(bump(2, &act.z[2])[0], &act.z[4]),
            (Topology::Dueling, 0) => {
                let z1 = bump(1, &act.z[1]);
                let z3 = bump(3, &act.z[3]);
                kink |= side_changed(&z1, &act.z[1]) || side_changed(&z3, &act.z[3]);
                let v = affine(&self.w[2], &self.b[2], &relus(&z1))[0];
                let a = affine(&self.w[4], &self.b[4], &relus(&z3));
                dueling_q(v, &a)
            }
            _ => unreachable!(),
        };
        (q, kink)
    }
}

/// One regression sample for the gradient check.
pub struct Sample {
    pub state: Vec<f64>,
    pub action: usize,
    pub target: f64,
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

/// Central differences of the batch-mean squared error for every parameter,
/// compared with `analytic` (laid out like the network's layers).
pub fn finite_difference_check(net: &NetworkParams, samples: &[Sample], analytic: &NetworkParams, h: f64) -> GradCheck {
    let oracle = OracleNet::from_params(net);
    let acts: Vec<Activations> = samples.iter().map(|s| oracle.activations(&s.state)).collect();
    let inputs: Vec<Vec<Vec<f64>>> = (0..oracle.w.len())
        .map(|k| acts.iter().map(|a| oracle.layer_input(a, k)).collect())
        .collect();
    let n = samples.len() as f64;
    let mut out = GradCheck {
        max_rel_err: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    for (k, layer) in analytic.layers().iter().enumerate() {
        for o in 0..layer.outputs {
            // Parameter index `inputs` stands for the bias.
            for i in 0..=layer.inputs {
                let mut loss = [0.0; 2];
                let mut kink = false;
                for (s, (sample, act)) in samples.iter().zip(&acts).enumerate() {
                    let scale = if i == layer.inputs { 1.0 } else { inputs[k][s][i] };
                    for (slot, sign) in [(0, 1.0), (1, -1.0)] {
                        let (q, crossed) = oracle.q_with_unit(act, k, o, act.z[k][o] + sign * h * scale);
                        kink |= crossed;
                        let err = q[sample.action] - sample.target;
                        loss[slot] += err * err / n;
                    }
                }
                if kink {
                    out.skipped_kinks += 1;
                    continue;
                }
                let numeric = (loss[0] - loss[1]) / (2.0 * h);
                let a = if i == layer.inputs {
                    layer.bias[o]
                } else {
                    layer.weights[o * layer.inputs + i]
                };
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                out.max_rel_err = out.max_rel_err.max(rel);
                out.checked += 1;
            }
        }
    }
    out
}
