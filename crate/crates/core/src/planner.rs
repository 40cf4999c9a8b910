//! Grid path planning, goal dispatch, and the pose math used to orient the robot.

use std::collections::VecDeque;

use crate::gridworld::{Cell, CellState, Environment, OccupancyGrid};
use crate::{Error, Result};

/// A goal aborted within this distance of where its plan was first made is
/// sent again once.
pub const RESEND_RADIUS: f64 = 2.0;

/// Unit quaternion `(x, y, z, w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Quaternion { x, y, z, w }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }

    /// Hamilton product: rotation `other` followed by `self`.
    pub fn mul(&self, other: &Quaternion) -> Quaternion {
        let (a, b) = (self, other);
        Quaternion {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.z, self.w]
    }
}

/// Planar heading as a quaternion: roll and pitch are zero.
pub fn quaternion_from_yaw(yaw: f64) -> Quaternion {
    let (s, c) = (yaw / 2.0).sin_cos();
    Quaternion::new(0.0, 0.0, s, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

pub type Matrix3 = [[f64; 3]; 3];

fn matmul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// `Rz(yaw) · Ry(pitch) · Rx(roll)`.
pub fn euler_rotation(angles: &EulerAngles) -> Matrix3 {
    let (sr, cr) = angles.roll.sin_cos();
    let (sp, cp) = angles.pitch.sin_cos();
    let (sy, cy) = angles.yaw.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]];
    let ry = [[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]];
    let rz = [[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]];
    matmul(&matmul(&rz, &ry), &rx)
}

pub fn euclidean_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(p.iter().zip(q).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt())
}

/// Whether an aborted goal should be sent again.
pub fn should_resend(robot: (f64, f64), initial_plan_position: (f64, f64)) -> bool {
    let d = ((robot.0 - initial_plan_position.0).powi(2) + (robot.1 - initial_plan_position.1).powi(2)).sqrt();
    d <= RESEND_RADIUS
}

/// Ordered 4-adjacent Free cells from start to goal, both inclusive.
pub type Path = Vec<Cell>;

/// Shortest 4-connected path over Free cells of `map`.
///
/// Unknown and Occupied cells are impassable. Neighbours are expanded in
/// row-major order, which fixes the path among equal-length alternatives.
/// `Ok(None)` means the goal cannot be reached; `Err` means the query itself
/// is invalid.
pub fn plan(map: &OccupancyGrid, from: Cell, to: Cell) -> Result<Option<Path>> {
    for (name, c) in [("start", from), ("goal", to)] {
        if !map.contains(c.x as isize, c.y as isize) {
            return Err(Error::InvalidArgument(format!(
                "{name} ({}, {}) outside the grid",
                c.x, c.y
            )));
        }
    }
    if map.get(from) != CellState::Free {
        return Err(Error::InvalidArgument(format!(
            "start ({}, {}) is not free",
            from.x, from.y
        )));
    }
    if map.get(to) != CellState::Free {
        return Ok(None);
    }
    let w = map.width();
    let idx = |c: Cell| c.y * w + c.x;
    let mut parent: Vec<Option<Cell>> = vec![None; w * map.height()];
    let mut seen = vec![false; w * map.height()];
    seen[idx(from)] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(cell) = queue.pop_front() {
        if cell == to {
            let mut path = vec![to];
            let mut cur = to;
            while let Some(p) = parent[idx(cur)] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Ok(Some(path));
        }
        for n in map.neighbors4(cell) {
            if !seen[idx(n)] && map.get(n) == CellState::Free {
                seen[idx(n)] = true;
                parent[idx(n)] = Some(cell);
                queue.push_back(n);
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchOutcome {
    /// Reached on the first plan.
    Reached { ticks: usize },
    /// The first plan failed near its origin; the resent goal was reached.
    Resent { ticks: usize },
    /// No path, even after the single allowed resend.
    Unreachable { resent: bool },
    /// A path existed but the tick allowance ran out on the way.
    Interrupted { ticks: usize },
}

impl DispatchOutcome {
    pub fn ticks(&self) -> usize {
        match *self {
            DispatchOutcome::Reached { ticks }
            | DispatchOutcome::Resent { ticks }
            | DispatchOutcome::Interrupted { ticks } => ticks,
            DispatchOutcome::Unreachable { .. } => 0,
        }
    }

    pub fn plan_attempts(&self) -> usize {
        match self {
            DispatchOutcome::Resent { .. } | DispatchOutcome::Unreachable { resent: true } => 2,
            _ => 1,
        }
    }
}

/// Plans to `goal` on the robot's map and drives there.
///
/// A failed plan is retried exactly once, and only if the robot is within
/// [`RESEND_RADIUS`] of `initial_plan_position`.
pub fn dispatch_goal(
    env: &mut Environment,
    goal: Cell,
    initial_plan_position: (f64, f64),
    max_ticks: usize,
) -> Result<DispatchOutcome> {
    let drive = |env: &mut Environment, path: Path| -> Result<(usize, bool)> {
        let ticks = env.step_along(&path, max_ticks)?;
        Ok((ticks, ticks + 1 == path.len()))
    };

    let from = env.pose().cell();
    if let Some(path) = plan(env.map(), from, goal)? {
        let (ticks, arrived) = drive(env, path)?;
        return Ok(if arrived {
            DispatchOutcome::Reached { ticks }
        } else {
            DispatchOutcome::Interrupted { ticks }
        });
    }
    let robot = (env.pose().x, env.pose().y);
    if !should_resend(robot, initial_plan_position) {
        return Ok(DispatchOutcome::Unreachable { resent: false });
    }
    match plan(env.map(), env.pose().cell(), goal)? {
        Some(path) => {
            let (ticks, arrived) = drive(env, path)?;
            Ok(if arrived {
                DispatchOutcome::Resent { ticks }
            } else {
                DispatchOutcome::Interrupted { ticks }
            })
        }
        None => Ok(DispatchOutcome::Unreachable { resent: true }),
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::gridworld::{load_map, SensorConfig};

    #[test]
    fn yaw_quaternions() {
        assert_eq!(quaternion_from_yaw(0.0), Quaternion::IDENTITY);
        let q = quaternion_from_yaw(PI);
        assert!(q.z == 1.0 && q.w.abs() < 1e-15);
        let q = quaternion_from_yaw(FRAC_PI_2);
        let h = 2f64.sqrt() / 2.0;
        assert!((q.z - h).abs() < 1e-15 && (q.w - h).abs() < 1e-15);
        assert_eq!((q.x, q.y), (0.0, 0.0));
    }

    #[test]
    fn euler_identity_and_yaw() {
        let r = euler_rotation(&EulerAngles::default());
        assert_eq!(r, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

        let r = euler_rotation(&EulerAngles {
            yaw: FRAC_PI_2,
            ..Default::default()
        });
        // R · x̂ = ŷ
        let x_image = [r[0][0], r[1][0], r[2][0]];
        assert!((x_image[0]).abs() < 1e-15 && (x_image[1] - 1.0).abs() < 1e-15 && x_image[2].abs() < 1e-15);
    }

    #[test]
    fn distances_and_resend() {
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(!should_resend((0.0, 0.0), (3.0, 4.0)));
        assert!((euclidean_distance(&[0.0, 0.0], &[1.0, 1.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(should_resend((0.0, 0.0), (1.0, 1.0)));
        assert!(should_resend((0.0, 0.0), (2.0, 0.0)));
        assert!(euclidean_distance(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn plan_basics() {
        let (grid, _) = load_map("#######\n#S....#\n#######\n").unwrap();
        let a = Cell::new(1, 1);
        assert_eq!(plan(&grid, a, a).unwrap(), Some(vec![a]));
        let path = plan(&grid, a, Cell::new(5, 1)).unwrap().unwrap();
        assert_eq!(path.len(), 5);

        let (sealed, _) = load_map("#######\n#S.#..#\n#######\n").unwrap();
        assert_eq!(plan(&sealed, a, Cell::new(5, 1)).unwrap(), None);
        assert!(plan(&sealed, Cell::new(0, 0), a).is_err());
    }

    #[test]
    fn plan_treats_unknown_as_blocked() {
        let (mut grid, _) = load_map("#####\n#S..#\n#####\n").unwrap();
        grid.set(Cell::new(2, 1), CellState::Unknown);
        assert_eq!(plan(&grid, Cell::new(1, 1), Cell::new(3, 1)).unwrap(), None);
    }

    #[test]
    fn dispatch_reaches_open_goal() {
        let (truth, pose) = load_map("#######\n#S....#\n#.....#\n#######\n").unwrap();
        let mut env = Environment::new(truth, pose, SensorConfig::default()).unwrap();
        env.sense();
        let out = dispatch_goal(&mut env, Cell::new(5, 2), (1.0, 1.0), usize::MAX).unwrap();
        assert_eq!(out, DispatchOutcome::Reached { ticks: 5 });
        assert_eq!(env.pose().cell(), Cell::new(5, 2));
    }

    #[test]
    fn dispatch_resends_only_near_origin() {
        let (truth, pose) = load_map("#######\n#S.#..#\n#######\n").unwrap();
        let mut env = Environment::new(truth, pose, SensorConfig::default()).unwrap();
        env.sense();
        let goal = Cell::new(4, 1);
        let near = dispatch_goal(&mut env, goal, (1.0, 1.0), usize::MAX).unwrap();
        assert_eq!(near, DispatchOutcome::Unreachable { resent: true });
        assert_eq!(near.plan_attempts(), 2);
        let far = dispatch_goal(&mut env, goal, (10.0, 10.0), usize::MAX).unwrap();
        assert_eq!(far, DispatchOutcome::Unreachable { resent: false });
        assert_eq!(far.plan_attempts(), 1);
    }
}
