//! Frontier detection, clustering, information gain, and the fixed-size
//! centroid record fed to the agent.

use std::collections::{BTreeSet, VecDeque};

use crate::gridworld::{Cell, CellState, OccupancyGrid};

/// Number of centroid slots the agent chooses between.
pub const MAX_CENTROIDS: usize = 10;

/// Free cells with at least one Unknown 8-neighbour, in row-major order.
pub fn detect_frontiers(map: &OccupancyGrid) -> BTreeSet<Cell> {
    map.coords()
        .filter(|&c| map.get(c) == CellState::Free && map.neighbors8(c).any(|n| map.get(n) == CellState::Unknown))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontierCluster {
    pub cells: Vec<Cell>,
    pub centroid: Cell,
}

/// Splits frontier cells into 8-connected components.
///
/// Clusters come out ordered by their first (row-major) cell. Each centroid is
/// the member nearest the arithmetic mean; ties go to the lowest row, then column.
pub fn cluster(frontiers: &BTreeSet<Cell>) -> Vec<FrontierCluster> {
    let mut remaining = frontiers.clone();
    let mut clusters = Vec::new();
    while let Some(&seed) = remaining.iter().next() {
        remaining.remove(&seed);
        let mut cells = vec![seed];
        let mut queue = VecDeque::from([seed]);
        while let Some(c) = queue.pop_front() {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (x, y) = (c.x as isize + dx, c.y as isize + dy);
                    if x < 0 || y < 0 {
                        continue;
                    }
                    let n = Cell::new(x as usize, y as usize);
                    if remaining.remove(&n) {
                        cells.push(n);
                        queue.push_back(n);
                    }
                }
            }
        }
        cells.sort();
        let centroid = snap_to_member(&cells);
        clusters.push(FrontierCluster { cells, centroid });
    }
    clusters
}

fn snap_to_member(cells: &[Cell]) -> Cell {
    let n = cells.len() as f64;
    let mx = cells.iter().map(|c| c.x as f64).sum::<f64>() / n;
    let my = cells.iter().map(|c| c.y as f64).sum::<f64>() / n;
    // `cells` is sorted row-major and min_by keeps the first minimum.
    *cells
        .iter()
        .min_by(|a, b| {
            let da = (a.x as f64 - mx).powi(2) + (a.y as f64 - my).powi(2);
            let db = (b.x as f64 - mx).powi(2) + (b.y as f64 - my).powi(2);
            da.total_cmp(&db)
        })
        .expect("clusters are nonempty")
}

/// Unknown fraction of the in-bounds cells within `radius` of `centroid`.
pub fn information_gain(map: &OccupancyGrid, centroid: (f64, f64), radius: usize) -> f64 {
    let r = radius as f64;
    let (cx, cy) = centroid;
    let x0 = (cx - r).floor().max(0.0) as usize;
    let y0 = (cy - r).floor().max(0.0) as usize;
    let x1 = ((cx + r).ceil().max(0.0) as usize).min(map.width() - 1);
    let y1 = ((cy + r).ceil().max(0.0) as usize).min(map.height() - 1);
    let mut total = 0usize;
    let mut unknown = 0usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            if d2 <= r * r {
                total += 1;
                if map.get(Cell::new(x, y)) == CellState::Unknown {
                    unknown += 1;
                }
            }
        }
    }
    if total == 0 {
        return 0.0;
    }
    unknown as f64 / total as f64
}

/// Ten candidate centroids (normalized to `[0, 1]`) with their gains.
///
/// Unused slots hold centroid `(0, 0)` and gain `0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CentroidRecord {
    pub centroids: [(f64, f64); MAX_CENTROIDS],
    pub gains: [f64; MAX_CENTROIDS],
}

impl CentroidRecord {
    pub fn is_padded(&self, slot: usize) -> bool {
        self.centroids[slot] == (0.0, 0.0)
    }

    pub fn padded_slots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..MAX_CENTROIDS).filter(|&i| self.is_padded(i))
    }

    pub fn valid_count(&self) -> usize {
        MAX_CENTROIDS - self.padded_slots().count()
    }

    /// Grid cell of a slot's normalized centroid.
    pub fn cell(&self, slot: usize, dims: (usize, usize)) -> Cell {
        let (x, y) = self.centroids[slot];
        Cell::new(denormalize(x, dims.0), denormalize(y, dims.1))
    }
}

pub fn normalize(v: usize, extent: usize) -> f64 {
    if extent <= 1 {
        0.0
    } else {
        v as f64 / (extent - 1) as f64
    }
}

pub fn denormalize(v: f64, extent: usize) -> usize {
    if extent <= 1 {
        0
    } else {
        (v * (extent - 1) as f64).round() as usize
    }
}

/// Scores each cluster, keeps the ten best by gain (ties: lower row, then
/// column), and zero-pads the rest.
pub fn build_record(clusters: &[FrontierCluster], map: &OccupancyGrid, radius: usize) -> CentroidRecord {
    let mut scored: Vec<(f64, Cell)> = clusters
        .iter()
        .map(|c| (information_gain(map, c.centroid.center(), radius), c.centroid))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut record = CentroidRecord::default();
    for (slot, (gain, cell)) in scored.into_iter().take(MAX_CENTROIDS).enumerate() {
        record.centroids[slot] = (normalize(cell.x, map.width()), normalize(cell.y, map.height()));
        record.gains[slot] = gain;
    }
    record
}
