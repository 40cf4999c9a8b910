//! Deterministic 2D world: ground-truth map, robot pose, perfect range sensor.
//!
//! Coordinates follow image convention: `x` is the column, `y` is the row,
//! and a cell `(x, y)` covers the square `[x - 0.5, x + 0.5) × [y - 0.5, y + 0.5)`
//! so cell centers sit on integer coordinates.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;

use crate::planner::{quaternion_from_yaw, Quaternion};
use crate::{Error, Result};

/// Ray-marching increment, in cells.
pub const RAY_STEP: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Unknown,
    Free,
    Occupied,
}

/// Integer grid coordinate. Ordered by row, then column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }

    pub fn is_4_adjacent(self, other: Cell) -> bool {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y) == 1
    }

    pub fn center(self) -> (f64, f64) {
        (self.x as f64, self.y as f64)
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const OFFSETS_4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
const OFFSETS_8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, fill: CellState) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyMap);
        }
        Ok(OccupancyGrid {
            width,
            height,
            cells: vec![fill; width * height],
        })
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<CellState>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyMap);
        }
        if cells.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{} cells for a {width}x{height} grid",
                cells.len()
            )));
        }
        Ok(OccupancyGrid { width, height, cells })
    }

    /// Same dimensions, every cell Unknown.
    pub fn unknown_like(&self) -> Self {
        OccupancyGrid {
            width: self.width,
            height: self.height,
            cells: vec![CellState::Unknown; self.cells.len()],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn get(&self, cell: Cell) -> CellState {
        self.cells[cell.y * self.width + cell.x]
    }

    pub fn set(&mut self, cell: Cell, state: CellState) {
        self.cells[cell.y * self.width + cell.x] = state;
    }

    pub fn contains(&self, x: isize, y: isize) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Row-major iterator over every coordinate.
    pub fn coords(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
    }

    fn offset(&self, cell: Cell, (dx, dy): (isize, isize)) -> Option<Cell> {
        let (x, y) = (cell.x as isize + dx, cell.y as isize + dy);
        self.contains(x, y).then(|| Cell::new(x as usize, y as usize))
    }

    /// In-bounds 4-neighbours in row-major order.
    pub fn neighbors4(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        OFFSETS_4.iter().filter_map(move |&d| self.offset(cell, d))
    }

    /// In-bounds 8-neighbours in row-major order.
    pub fn neighbors8(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        OFFSETS_8.iter().filter_map(move |&d| self.offset(cell, d))
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    pub fn has_closed_border(&self) -> bool {
        self.coords()
            .filter(|c| c.x == 0 || c.y == 0 || c.x + 1 == self.width || c.y + 1 == self.height)
            .all(|c| self.get(c) == CellState::Occupied)
    }

    fn ensure_same_dims(&self, other: &OccupancyGrid) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    /// Free cells 4-reachable from `start` (inclusive) through Free cells.
    pub fn reachable_from(&self, start: Cell) -> Vec<bool> {
        let mut seen = vec![false; self.cells.len()];
        if self.get(start) != CellState::Free {
            return seen;
        }
        let mut queue = VecDeque::from([start]);
        seen[start.y * self.width + start.x] = true;
        while let Some(cell) = queue.pop_front() {
            for n in self.neighbors4(cell) {
                let idx = n.y * self.width + n.x;
                if !seen[idx] && self.get(n) == CellState::Free {
                    seen[idx] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Plain PGM ("P2") rendering: Unknown 128, Free 255, Occupied 0.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in self.cells.chunks(self.width) {
            let line: Vec<&str> = row
                .iter()
                .map(|c| match c {
                    CellState::Unknown => "128",
                    CellState::Free => "255",
                    CellState::Occupied => "0",
                })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_pgm(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        if tokens.next() != Some("P2") {
            return Err(Error::Pgm("missing P2 magic".into()));
        }
        let mut header = |what: &str| -> Result<usize> {
            tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Pgm(format!("bad {what}")))
        };
        let width = header("width")?;
        let height = header("height")?;
        let maxval = header("maxval")?;
        if maxval != 255 {
            return Err(Error::Pgm(format!("maxval {maxval}, expected 255")));
        }
        let cells = tokens
            .map(|t| match t {
                "128" => Ok(CellState::Unknown),
                "255" => Ok(CellState::Free),
                "0" => Ok(CellState::Occupied),
                other => Err(Error::Pgm(format!("unexpected pixel value {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        OccupancyGrid::from_cells(width, height, cells).map_err(|e| Error::Pgm(e.to_string()))
    }
}

impl fmt::Display for OccupancyGrid {
    /// Map-file characters; Unknown renders as `?`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.width) {
            for c in row {
                let ch = match c {
                    CellState::Unknown => '?',
                    CellState::Free => '.',
                    CellState::Occupied => '#',
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    pub orientation: Quaternion,
}

impl RobotPose {
    pub fn at(cell: Cell) -> Self {
        RobotPose {
            x: cell.x as f64,
            y: cell.y as f64,
            orientation: Quaternion::IDENTITY,
        }
    }

    /// The cell whose square contains the pose.
    pub fn cell(&self) -> Cell {
        Cell::new(
            (self.x + 0.5).floor().max(0.0) as usize,
            (self.y + 0.5).floor().max(0.0) as usize,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorConfig {
    pub range: usize,
    pub ray_count: usize,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            range: 6,
            ray_count: 72,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.range < 1 {
            return Err(Error::InvalidArgument("sensor range must be >= 1".into()));
        }
        if self.ray_count < 8 {
            return Err(Error::InvalidArgument("ray_count must be >= 8".into()));
        }
        Ok(())
    }
}

/// Parses a map file: `#` occupied, `.` free, `S` the (free) start cell.
pub fn load_map(text: &str) -> Result<(OccupancyGrid, RobotPose)> {
    let rows: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect::<Vec<_>>();
    // Trailing blank lines are tolerated; interior ones are ragged rows.
    let last = rows.iter().rposition(|r| !r.is_empty()).ok_or(Error::EmptyMap)?;
    let rows = &rows[..=last];

    let width = rows[0].chars().count();
    let mut cells = Vec::with_capacity(width * rows.len());
    let mut start = None;
    for (y, row) in rows.iter().enumerate() {
        let found = row.chars().count();
        if found != width {
            return Err(Error::RaggedRows {
                line: y + 1,
                expected: width,
                found,
            });
        }
        for (x, ch) in row.chars().enumerate() {
            let state = match ch {
                '#' => CellState::Occupied,
                '.' => CellState::Free,
                'S' => {
                    if start.replace(Cell::new(x, y)).is_some() {
                        return Err(Error::MultipleStarts);
                    }
                    CellState::Free
                }
                other => {
                    return Err(Error::MalformedCharacter {
                        line: y + 1,
                        column: x + 1,
                        found: other,
                    })
                }
            };
            cells.push(state);
        }
    }
    let grid = OccupancyGrid::from_cells(width, rows.len(), cells)?;
    let start = start.ok_or(Error::NoStart)?;
    Ok((grid, RobotPose::at(start)))
}

/// Casts `cfg.ray_count` evenly spaced rays from `pose` into `truth` and
/// copies what they see into `map`.
///
/// Each ray is sampled every [`RAY_STEP`] cells out to `cfg.range`. Traversed
/// cells become Free; the first Occupied cell becomes Occupied and stops the ray.
pub fn sense(truth: &OccupancyGrid, map: &mut OccupancyGrid, pose: &RobotPose, cfg: &SensorConfig) {
    let steps = cfg.range * 4;
    for k in 0..cfg.ray_count {
        let theta = std::f64::consts::TAU * k as f64 / cfg.ray_count as f64;
        let (sin, cos) = theta.sin_cos();
        for s in 0..=steps {
            let t = s as f64 * RAY_STEP;
            let px = (pose.x + t * cos + 0.5).floor();
            let py = (pose.y + t * sin + 0.5).floor();
            if !truth.contains(px as isize, py as isize) {
                break;
            }
            let cell = Cell::new(px as usize, py as usize);
            if truth.get(cell) == CellState::Occupied {
                map.set(cell, CellState::Occupied);
                break;
            }
            map.set(cell, CellState::Free);
        }
    }
}

/// Fraction of counted cells that are known in `map`.
///
/// Counted cells are every Free truth cell plus every Occupied truth cell
/// 4-adjacent to one.
pub fn coverage(map: &OccupancyGrid, truth: &OccupancyGrid) -> Result<f64> {
    map.ensure_same_dims(truth)?;
    let free: Vec<bool> = truth.cells.iter().map(|&c| c == CellState::Free).collect();
    Ok(coverage_over(map, truth, &free))
}

/// Like [`coverage`], restricted to the Free cells reachable from `start`.
pub fn coverage_reachable(map: &OccupancyGrid, truth: &OccupancyGrid, start: Cell) -> Result<f64> {
    map.ensure_same_dims(truth)?;
    Ok(coverage_over(map, truth, &truth.reachable_from(start)))
}

fn coverage_over(map: &OccupancyGrid, truth: &OccupancyGrid, free_mask: &[bool]) -> f64 {
    let w = truth.width;
    let mut counted = 0usize;
    let mut known = 0usize;
    for cell in truth.coords() {
        let idx = cell.y * w + cell.x;
        let include = free_mask[idx]
            || (truth.get(cell) == CellState::Occupied && truth.neighbors4(cell).any(|n| free_mask[n.y * w + n.x]));
        if include {
            counted += 1;
            if map.cells[idx] != CellState::Unknown {
                known += 1;
            }
        }
    }
    if counted == 0 {
        return 1.0;
    }
    known as f64 / counted as f64
}

/// The world a single robot explores: ground truth, its own map, and a clock.
#[derive(Debug, Clone)]
pub struct Environment {
    truth: OccupancyGrid,
    map: OccupancyGrid,
    pose: RobotPose,
    origin: Cell,
    sensor: SensorConfig,
    ticks: usize,
}

impl Environment {
    /// The robot map starts fully Unknown; call [`Environment::sense`] to take the first scan.
    pub fn new(truth: OccupancyGrid, start: RobotPose, sensor: SensorConfig) -> Result<Self> {
        sensor.validate()?;
        let cell = start.cell();
        if !truth.contains(cell.x as isize, cell.y as isize) {
            return Err(Error::InvalidArgument("start pose outside the grid".into()));
        }
        if truth.get(cell) != CellState::Free {
            return Err(Error::StartOccupied);
        }
        let map = truth.unknown_like();
        Ok(Environment {
            truth,
            map,
            pose: start,
            origin: cell,
            sensor,
            ticks: 0,
        })
    }

    /// Replaces the robot map, e.g. with the truth for a pre-explored world.
    pub fn with_map(mut self, map: OccupancyGrid) -> Result<Self> {
        self.truth.ensure_same_dims(&map)?;
        self.map = map;
        Ok(self)
    }

    pub fn truth(&self) -> &OccupancyGrid {
        &self.truth
    }

    pub fn map(&self) -> &OccupancyGrid {
        &self.map
    }

    pub fn pose(&self) -> &RobotPose {
        &self.pose
    }

    pub fn ticks(&self) -> usize {
        self.ticks
    }

    pub fn sensor(&self) -> &SensorConfig {
        &self.sensor
    }

    pub fn sense(&mut self) {
        sense(&self.truth, &mut self.map, &self.pose, &self.sensor);
    }

    /// Coverage over the region reachable from the starting cell.
    pub fn coverage(&self) -> f64 {
        coverage_over(&self.map, &self.truth, &self.truth.reachable_from(self.origin))
    }

    /// Moves along `path` one cell per tick, sensing after every tick, and
    /// stops early once `max_ticks` ticks have elapsed. Returns ticks taken.
    pub fn step_along(&mut self, path: &[Cell], max_ticks: usize) -> Result<usize> {
        let first = *path.first().ok_or_else(|| Error::InvalidPath("empty path".into()))?;
        if first != self.pose.cell() {
            return Err(Error::InvalidPath(format!(
                "path starts at ({}, {}) but robot is at ({}, {})",
                first.x,
                first.y,
                self.pose.cell().x,
                self.pose.cell().y
            )));
        }
        let mut taken = 0;
        for pair in path.windows(2) {
            if taken == max_ticks {
                break;
            }
            let (from, to) = (pair[0], pair[1]);
            if !from.is_4_adjacent(to) {
                return Err(Error::InvalidPath(format!(
                    "({}, {}) -> ({}, {}) is not a 4-neighbour step",
                    from.x, from.y, to.x, to.y
                )));
            }
            if !self.truth.contains(to.x as isize, to.y as isize) {
                return Err(Error::InvalidPath("path leaves the grid".into()));
            }
            if self.truth.get(to) == CellState::Occupied {
                return Err(Error::Collision(to));
            }
            if self.map.get(to) != CellState::Free {
                return Err(Error::InvalidPath(format!("({}, {}) is not known free", to.x, to.y)));
            }
            let yaw = (to.y as f64 - from.y as f64).atan2(to.x as f64 - from.x as f64);
            self.pose = RobotPose {
                x: to.x as f64,
                y: to.y as f64,
                orientation: quaternion_from_yaw(yaw),
            };
            self.ticks += 1;
            taken += 1;
            self.sense();
        }
        Ok(taken)
    }
}
