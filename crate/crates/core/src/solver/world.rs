use std::time::Instant;

use nalgebra::DVector;
use nalgebra_sparse::CscMatrix;
use serde::{Deserialize, Serialize};

use super::{converged, newton_direction, IncrementalPotential, SolverError, SolverParams, SolverReport, StepData};
use crate::articulation::{
    build_reduction, limit_margins, limit_toi, motor_force, resolve_motor, ArticulationError, DofReduction, JointKind,
    JointSpec, MotorCommand, ResolvedMotor, MAX_KAPPA_MOTOR,
};
use crate::assembly::{body_coordinates, Order};
use crate::contact::{active_pairs, build_anchors, stencil_ids, update_barrier_stiffness, world_positions, ContactScene};
use crate::dynamics::{predictor, AffineBody, Mat12, Vec12};
use crate::geometry::narrowphase::{all_pairs, PlacedMesh};
use crate::geometry::{broadphase, ccd_toi, Candidate, SweptMesh, Vec3};
use crate::par;

/// Smallest line-search fraction before the step is declared stalled.
const MIN_ALPHA: f64 = 1e-12;
/// Motor tracking error above which the motor stiffness is doubled.
const MOTOR_TOLERANCE: f64 = 1e-6;

/// Serializable copy of a world; reloading reproduces it bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub bodies: Vec<AffineBody>,
    pub joints: Vec<JointSpec>,
    pub params: SolverParams,
    pub y: Vec<f64>,
    pub motor_kappa: Vec<f64>,
    pub joint_coordinates: Vec<f64>,
    pub time: f64,
    pub steps: usize,
    /// Body pairs whose contact was disabled beyond the joint defaults.
    pub disabled_contacts: Vec<[usize; 2]>,
}

fn bounds(points: &[Vec3]) -> (Vec3, Vec3) {
    let b = crate::geometry::Aabb::from_points(points);
    (b.min, b.max)
}

/// Simulation state: bodies, joints, the reduced coordinates that place
/// them, and the adaptive stiffnesses.
#[derive(Debug, Clone)]
pub struct World {
    pub bodies: Vec<AffineBody>,
    pub joints: Vec<JointSpec>,
    pub reduction: DofReduction,
    pub params: SolverParams,
    pub y: DVector<f64>,
    /// Penalty stiffness of each joint's motor.
    pub motor_kappa: Vec<f64>,
    /// Unwrapped joint coordinates at the current state.
    pub joint_coordinates: Vec<f64>,
    pub time: f64,
    pub steps: usize,
    pub(super) masses: Vec<Mat12>,
    pub(super) s_transpose: CscMatrix<f64>,
    allowed: Vec<Vec<bool>>,
}

impl World {
    /// Builds the reduction and checks that the initial configuration is
    /// intersection-free, strictly separated and inside every joint limit.
    pub fn new(bodies: Vec<AffineBody>, joints: Vec<JointSpec>, params: SolverParams) -> Result<Self, SolverError> {
        Self::with_disabled_contacts(bodies, joints, params, &[])
    }

    /// Like [`World::new`], with contact between the listed body pairs ignored.
    pub fn with_disabled_contacts(
        bodies: Vec<AffineBody>,
        joints: Vec<JointSpec>,
        params: SolverParams,
        disabled: &[[usize; 2]],
    ) -> Result<Self, SolverError> {
        let reduction = build_reduction(&bodies, &joints)?;
        let n = bodies.len();
        let mut allowed = vec![vec![false; n]; n];
        for a in 0..n {
            for b in 0..n {
                allowed[a][b] =
                    a != b && bodies[a].collide && bodies[b].collide && !(bodies[a].is_static && bodies[b].is_static);
            }
        }
        for [a, b] in joints.iter().map(|j| [j.parent, j.child]).chain(disabled.iter().copied()) {
            allowed[a][b] = false;
            allowed[b][a] = false;
        }
        let masses = bodies.iter().filter(|b| !b.is_static).map(|b| b.generalized_mass()).collect();
        let s_transpose = reduction.s_csc.transpose();
        let y = reduction.y0.clone();
        let mut world = Self {
            motor_kappa: vec![params.kappa_motor; joints.len()],
            joint_coordinates: vec![0.0; joints.len()],
            bodies,
            joints,
            reduction,
            params,
            y,
            time: 0.0,
            steps: 0,
            masses,
            s_transpose,
            allowed,
        };
        let q = world.full_q();
        world.joint_coordinates = world.joints.iter().map(|j| j.raw_coordinate(&world.reduction.offsets, &q)).collect();
        for (j, lo, hi) in limit_margins(&world.joints, &world.reduction.offsets, &q) {
            if lo <= 0.0 || hi <= 0.0 {
                return Err(ArticulationError::LimitViolated { joint: world.joints[j].name.clone(), margin: lo.min(hi) }.into());
            }
        }
        let positions = world.positions(&q);
        let placed: Vec<PlacedMesh<'_>> = world
            .bodies
            .iter()
            .enumerate()
            .map(|(i, b)| PlacedMesh { body: i, mesh: &b.mesh, vertices: &positions[i] })
            .collect();
        let offending: Vec<String> = all_pairs(&placed, |a, b| world.allow(a, b))
            .into_iter()
            .filter(|p| p.intersecting || p.distance <= 0.0)
            .map(|p| {
                let hi_a = bounds(&positions[p.body_a]).1;
                let lo_b = bounds(&positions[p.body_b]).0;
                let lift = (hi_a.z - lo_b.z).max(0.0) + world.params.barrier.dhat;
                format!(
                    "{} / {} (intersecting: {}, distance {:e}; lifting {} by {lift:.6} m along +z separates their bounding boxes)",
                    world.bodies[p.body_a].name,
                    world.bodies[p.body_b].name,
                    p.intersecting,
                    p.distance,
                    world.bodies[p.body_b].name,
                )
            })
            .collect();
        if !offending.is_empty() {
            return Err(SolverError::InitialContact(offending.join("; ")));
        }
        Ok(world)
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        let jointed = |a: usize, b: usize| self.joints.iter().any(|j| (j.parent, j.child) == (a, b) || (j.parent, j.child) == (b, a));
        let n = self.bodies.len();
        let mut disabled_contacts = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let default = self.bodies[a].collide
                    && self.bodies[b].collide
                    && !(self.bodies[a].is_static && self.bodies[b].is_static)
                    && !jointed(a, b);
                if default && !self.allowed[a][b] {
                    disabled_contacts.push([a, b]);
                }
            }
        }
        WorldSnapshot {
            bodies: self.bodies.clone(),
            joints: self.joints.clone(),
            params: self.params,
            y: self.y.as_slice().to_vec(),
            motor_kappa: self.motor_kappa.clone(),
            joint_coordinates: self.joint_coordinates.clone(),
            time: self.time,
            steps: self.steps,
            disabled_contacts,
        }
    }

    pub fn from_snapshot(s: WorldSnapshot) -> Result<Self, SolverError> {
        let mut world = Self::with_disabled_contacts(s.bodies, s.joints, s.params, &s.disabled_contacts)?;
        if s.y.len() != world.y.len() {
            return Err(SolverError::Snapshot(format!(
                "snapshot has {} reduced coordinates, the joints give {}",
                s.y.len(),
                world.y.len()
            )));
        }
        world.y = DVector::from_vec(s.y);
        world.motor_kappa = s.motor_kappa;
        world.joint_coordinates = s.joint_coordinates;
        world.time = s.time;
        world.steps = s.steps;
        Ok(world)
    }

    /// Whether contact between two bodies is resolved.
    pub fn allow(&self, a: usize, b: usize) -> bool {
        self.allowed[a][b]
    }

    /// Excludes (or re-enables) contact between two bodies.
    pub fn set_allow(&mut self, a: usize, b: usize, allow: bool) {
        self.allowed[a][b] = allow;
        self.allowed[b][a] = allow;
    }

    pub fn contact_scene(&self) -> ContactScene<'_> {
        ContactScene { bodies: &self.bodies, offsets: &self.reduction.offsets }
    }

    pub fn full_q(&self) -> DVector<f64> {
        self.reduction.full(&self.y)
    }

    pub fn positions(&self, q: &DVector<f64>) -> Vec<Vec<Vec3>> {
        world_positions(&self.contact_scene(), q)
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Candidates whose boxes come within `inflation` over the linear sweep
    /// `q0 → q1`.
    pub fn candidates(&self, q0: &DVector<f64>, q1: &DVector<f64>, inflation: f64) -> Vec<Candidate> {
        let (p0, p1) = (self.positions(q0), self.positions(q1));
        let meshes: Vec<SweptMesh<'_>> = self
            .bodies
            .iter()
            .enumerate()
            .map(|(i, b)| SweptMesh { body: i, mesh: &b.mesh, start: &p0[i], end: &p1[i] })
            .collect();
        broadphase(&meshes, inflation, |a, b| self.allow(a, b), self.params.execution)
    }

    /// Smallest contact distance below `d̂` at `q`.
    pub fn contact_distance(&self, q: &DVector<f64>) -> Result<Option<f64>, SolverError> {
        let cands = self.candidates(q, q, self.params.barrier.dhat);
        let positions = self.positions(q);
        let pairs = active_pairs(&self.contact_scene(), &positions, &cands, self.params.barrier.dhat, self.params.execution)?;
        Ok(pairs.iter().map(|p| p.distance).reduce(f64::min))
    }

    /// Exact minimum distance over all contact-enabled body pairs.
    pub fn min_separation(&self) -> f64 {
        let q = self.full_q();
        let positions = self.positions(&q);
        let placed: Vec<PlacedMesh<'_>> = self
            .bodies
            .iter()
            .enumerate()
            .map(|(i, b)| PlacedMesh { body: i, mesh: &b.mesh, vertices: &positions[i] })
            .collect();
        crate::geometry::narrowphase::min_distance(&placed, |a, b| self.allow(a, b))
    }

    /// World-space centre of mass of a body at the current state.
    pub fn center_of_mass(&self, body: usize) -> Vec3 {
        match self.reduction.offsets[body] {
            Some(o) => crate::dynamics::translation(&body_coordinates(&self.full_q(), o)),
            None => self.bodies[body].center_of_mass(),
        }
    }

    fn resolve_motors(&self, commands: &[MotorCommand], warnings: &mut Vec<String>) -> Result<Vec<ResolvedMotor>, SolverError> {
        let dhat = self.params.barrier.dhat;
        commands
            .iter()
            .map(|cmd| {
                let joint = self.joints.get(cmd.joint).ok_or_else(|| ArticulationError::InvalidMotor {
                    joint: format!("#{}", cmd.joint),
                    reason: "no such joint".into(),
                })?;
                let margin = match joint.kind {
                    JointKind::Revolute => 2.0 * dhat / joint.reference_length,
                    _ => 2.0 * dhat,
                };
                let (m, w) = resolve_motor(
                    cmd,
                    joint,
                    self.joint_coordinates[cmd.joint],
                    self.params.h,
                    margin,
                    self.motor_kappa[cmd.joint],
                )?;
                warnings.extend(w);
                Ok(m)
            })
            .collect()
    }

    fn step_data(
        &self,
        motors: Vec<ResolvedMotor>,
        external: &[(usize, Vec12)],
    ) -> Result<StepData, SolverError> {
        let params = &self.params;
        let q_prev = self.full_q();
        let mut forces: Vec<Vec12> = self.bodies.iter().map(|b| b.gravity_force(&params.gravity)).collect();
        for m in &motors {
            if let Some((body, f)) = motor_force(m, &self.joints, &self.reduction.offsets, &q_prev) {
                forces[body] += f;
            }
        }
        for (body, f) in external {
            forces[*body] += f;
        }
        let mut q_tilde = q_prev.clone();
        for (i, body) in self.bodies.iter().enumerate() {
            let Some(o) = self.reduction.offsets[i] else { continue };
            let qb = body_coordinates(&q_prev, o);
            let xt = predictor(&qb, &body.qdot, &self.masses[o / 12], &forces[i], params.h);
            q_tilde.rows_mut(o, 12).copy_from(&xt);
        }
        let scene = self.contact_scene();
        let positions = self.positions(&q_prev);
        let cands = self.candidates(&q_prev, &q_prev, params.barrier.dhat);
        let pairs = active_pairs(&scene, &positions, &cands, params.barrier.dhat, params.execution)?;
        let anchors = build_anchors(&scene, &positions, &pairs, &params.barrier);
        Ok(StepData { q_prev, q_tilde, anchors, motors })
    }

    /// Largest admissible fraction of `q0 → q1` from CCD and joint limits.
    fn max_step(&self, q0: &DVector<f64>, q1: &DVector<f64>, candidates: &[Candidate]) -> Result<f64, SolverError> {
        let (p0, p1) = (self.positions(q0), self.positions(q1));
        let scene = self.contact_scene();
        let ccd = self.params.ccd;
        let tois = par::map(self.params.execution, candidates, |c| {
            let ids = stencil_ids(&scene, c);
            let start = ids.map(|(b, v)| p0[b][v]);
            let end = ids.map(|(b, v)| p1[b][v]);
            ccd_toi(c.kind, &start, &end, 0.0, &ccd)
        });
        let mut alpha: f64 = 1.0;
        for t in tois {
            if let Some(t) = t? {
                alpha = alpha.min(t);
            }
        }
        let lt = limit_toi(&self.joints, &self.reduction.offsets, q0, q1, ccd.conservative_factor, ccd.min_step)?;
        Ok(alpha.min(lt))
    }

    /// Advances one step with the given motor commands.
    pub fn step(&mut self, commands: &[MotorCommand]) -> Result<SolverReport, SolverError> {
        self.step_with_forces(commands, &[])
    }

    /// Advances one step with extra generalized forces applied to bodies.
    /// The state is left unchanged when the step fails.
    pub fn step_with_forces(
        &mut self,
        commands: &[MotorCommand],
        external: &[(usize, Vec12)],
    ) -> Result<SolverReport, SolverError> {
        let start = Instant::now();
        let mut warnings = Vec::new();
        let motors = self.resolve_motors(commands, &mut warnings)?;
        let data = self.step_data(motors, external)?;
        let params = self.params;
        let dhat = params.barrier.dhat;
        let potential = IncrementalPotential { world: self, step: &data };

        let mut y = self.y.clone();
        let mut history = Vec::new();
        let mut iterations = 0;
        let mut is_converged = false;
        let mut gradient_norm = 0.0;
        let mut step_size = 0.0;
        let mut min_iterate = f64::INFINITY;
        for _ in 0..params.max_iterations {
            let q = self.reduction.full(&y);
            let cands = self.candidates(&q, &q, dhat);
            let ev = potential.evaluate(&y, &cands, Order::Hessian)?;
            if history.is_empty() {
                history.push(ev.energy);
            }
            gradient_norm = ev.gradient.norm();
            let hess = ev.hessian.as_ref().expect("hessian requested");
            let dir = newton_direction(hess, &ev.gradient, params.dense_threshold);
            if dir.gradient_fallback {
                warnings.push(format!("iteration {iterations}: Hessian factorization failed, using gradient descent"));
            }
            let delta_q = &self.reduction.s * &dir.delta;
            let small = converged(delta_q.amax(), params.h, params.tol_v);

            let q1 = &q + &delta_q;
            let swept = self.candidates(&q, &q1, dhat);
            let alpha_max = self.max_step(&q, &q1, &swept)?;
            let e0 = potential.evaluate(&y, &swept, Order::Value)?.energy;
            let mut alpha = alpha_max;
            let accepted = loop {
                if alpha < MIN_ALPHA {
                    break None;
                }
                let trial = &y + &dir.delta * alpha;
                match potential.evaluate(&trial, &swept, Order::Value) {
                    Ok(ev) if ev.energy < e0 => break Some((trial, ev)),
                    Ok(_) | Err(SolverError::Contact(_)) | Err(SolverError::NonFinite) => alpha *= 0.5,
                    Err(e) => return Err(e),
                }
            };
            let Some((trial, ev)) = accepted else {
                if small {
                    // The converged step itself is optional.
                    is_converged = true;
                    break;
                }
                return Err(SolverError::Stalled {
                    alpha,
                    diagnostic: format!(
                        "max step {alpha_max:e}, energy {e0:e}, gradient norm {gradient_norm:e}, regularization {:e}",
                        dir.regularization
                    ),
                });
            };
            y = trial;
            step_size = alpha;
            min_iterate = min_iterate.min(ev.min_distance);
            history.push(ev.energy);
            iterations += 1;
            if small {
                is_converged = true;
                break;
            }
        }
        if !is_converged {
            warnings.push(format!("Newton did not converge in {} iterations", params.max_iterations));
        }

        // Commit.
        let q_new = self.reduction.full(&y);
        let min_distance = self.contact_distance(&q_new)?;
        let h = params.h;
        for (i, body) in self.bodies.iter_mut().enumerate() {
            let Some(o) = self.reduction.offsets[i] else { continue };
            let qn = body_coordinates(&q_new, o);
            body.qdot = (qn - body_coordinates(&data.q_prev, o)) / h;
            body.q = qn;
        }
        self.y = y;
        for (j, joint) in self.joints.iter().enumerate() {
            self.joint_coordinates[j] = joint.coordinate(&self.reduction.offsets, &q_new, self.joint_coordinates[j]);
        }
        for m in &data.motors {
            if let Some(target) = m.target {
                if (self.joint_coordinates[m.joint] - target).abs() > MOTOR_TOLERANCE {
                    self.motor_kappa[m.joint] = (2.0 * self.motor_kappa[m.joint]).min(MAX_KAPPA_MOTOR);
                }
            }
        }
        if let Some(d) = min_distance {
            self.params.barrier.kappa = update_barrier_stiffness(d, self.params.barrier.kappa, &self.params.barrier);
        }
        self.time += h;
        self.steps += 1;

        Ok(SolverReport {
            iterations,
            converged: is_converged,
            gradient_norm,
            step_size,
            min_distance,
            min_iterate_distance: min_iterate.is_finite().then_some(min_iterate),
            wall_time: start.elapsed().as_secs_f64(),
            warnings,
            energy_history: history,
            barrier_stiffness: self.params.barrier.kappa,
        })
    }
}
