//! The URDF subset used for robot structure: links with box or OBJ mesh
//! geometry and fixed/revolute/continuous/prismatic joints.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::SceneError;
use crate::articulation::JointKind;
use crate::geometry::Vec3;

pub const DEFAULT_DENSITY: f64 = 1000.0;
pub const DEFAULT_MU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LinkGeometry {
    Box { size: Vec3 },
    /// Resolved path of an OBJ file.
    Mesh { path: PathBuf, scale: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDescription {
    pub name: String,
    /// Geometry pieces with their placement in the link frame.
    pub geometry: Vec<(Isometry3<f64>, LinkGeometry)>,
    pub density: f64,
    pub mu: f64,
    pub collide: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDescription {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Child link frame relative to the parent link frame.
    pub origin: Isometry3<f64>,
    /// Unit axis in the joint frame.
    pub axis: Vec3,
    pub limits: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotDescription {
    pub name: String,
    pub links: Vec<LinkDescription>,
    pub joints: Vec<JointDescription>,
    pub root: String,
}

impl RobotDescription {
    pub fn link(&self, name: &str) -> Option<&LinkDescription> {
        self.links.iter().find(|l| l.name == name)
    }

    pub fn joint(&self, name: &str) -> Option<&JointDescription> {
        self.joints.iter().find(|j| j.name == name)
    }

    /// Pose of every link frame relative to the root frame, parents first,
    /// with all joints at zero.
    pub fn link_poses(&self) -> Vec<(String, Isometry3<f64>)> {
        self.link_poses_at(|_| 0.0)
    }

    /// Link poses with each joint displaced by `position(joint name)`.
    pub fn link_poses_at(&self, position: impl Fn(&str) -> f64) -> Vec<(String, Isometry3<f64>)> {
        let mut out = vec![(self.root.clone(), Isometry3::identity())];
        let mut i = 0;
        while i < out.len() {
            let (name, pose) = out[i].clone();
            for j in self.joints.iter().filter(|j| j.parent == name) {
                let s = position(&j.name);
                let motion = match j.kind {
                    JointKind::Prismatic => Isometry3::translation(j.axis.x * s, j.axis.y * s, j.axis.z * s),
                    JointKind::Revolute => Isometry3::rotation(j.axis * s),
                    JointKind::Fixed => Isometry3::identity(),
                };
                out.push((j.child.clone(), pose * j.origin * motion));
            }
            i += 1;
        }
        out
    }
}

fn numbers(text: &str, what: &str) -> Result<Vec<f64>, SceneError> {
    text.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| SceneError::Urdf(format!("bad number {t:?} in {what}"))))
        .collect()
}

fn vec3(text: &str, what: &str) -> Result<Vec3, SceneError> {
    let v = numbers(text, what)?;
    if v.len() != 3 {
        return Err(SceneError::Urdf(format!("{what} needs three values, got {:?}", text)));
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

/// `xyz` then fixed-axis roll-pitch-yaw, as in URDF.
pub fn pose(xyz: Vec3, rpy: Vec3) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::from(xyz), UnitQuaternion::from_euler_angles(rpy.x, rpy.y, rpy.z))
}

fn origin(node: roxmltree::Node<'_, '_>, what: &str) -> Result<Isometry3<f64>, SceneError> {
    let Some(o) = node.children().find(|c| c.has_tag_name("origin")) else {
        return Ok(Isometry3::identity());
    };
    let xyz = o.attribute("xyz").map(|t| vec3(t, what)).transpose()?.unwrap_or_else(Vec3::zeros);
    let rpy = o.attribute("rpy").map(|t| vec3(t, what)).transpose()?.unwrap_or_else(Vec3::zeros);
    Ok(pose(xyz, rpy))
}

fn attr_f64(node: roxmltree::Node<'_, '_>, name: &str, what: &str) -> Result<Option<f64>, SceneError> {
    node.attribute(name)
        .map(|t| t.trim().parse::<f64>().map_err(|_| SceneError::Urdf(format!("bad {name} {t:?} in {what}"))))
        .transpose()
}

fn parse_link(node: roxmltree::Node<'_, '_>, base: &Path) -> Result<LinkDescription, SceneError> {
    let name = node.attribute("name").ok_or_else(|| SceneError::Urdf("link without name".into()))?.to_string();
    let what = format!("link {name}");
    // Collision geometry wins over visual geometry when both are present.
    let sources: Vec<_> = node.children().filter(|c| c.has_tag_name("collision")).collect();
    let sources = if sources.is_empty() {
        node.children().filter(|c| c.has_tag_name("visual")).collect()
    } else {
        sources
    };
    let mut geometry = Vec::new();
    for src in sources {
        let placement = origin(src, &what)?;
        let Some(g) = src.children().find(|c| c.has_tag_name("geometry")) else { continue };
        for shape in g.children().filter(|c| c.is_element()) {
            match shape.tag_name().name() {
                "box" => {
                    let size = vec3(shape.attribute("size").unwrap_or(""), &what)?;
                    geometry.push((placement, LinkGeometry::Box { size }));
                }
                "mesh" => {
                    let file = shape
                        .attribute("filename")
                        .ok_or_else(|| SceneError::Urdf(format!("mesh without filename in {what}")))?;
                    let path = base.join(file.trim_start_matches("file://"));
                    if !path.exists() {
                        return Err(SceneError::MissingFile(path));
                    }
                    let scale = shape.attribute("scale").map(|t| vec3(t, &what)).transpose()?.unwrap_or(Vec3::repeat(1.0));
                    geometry.push((placement, LinkGeometry::Mesh { path, scale }));
                }
                other => return Err(SceneError::Urdf(format!("unsupported geometry {other:?} in {what}"))),
            }
        }
    }
    let sim = node.children().find(|c| c.has_tag_name("sim"));
    let density = match sim {
        Some(s) => attr_f64(s, "density", &what)?.unwrap_or(DEFAULT_DENSITY),
        None => DEFAULT_DENSITY,
    };
    let mu = match sim {
        Some(s) => attr_f64(s, "mu", &what)?.unwrap_or(DEFAULT_MU),
        None => DEFAULT_MU,
    };
    let collide = sim.and_then(|s| s.attribute("collide")).map(|v| v != "false").unwrap_or(true);
    Ok(LinkDescription { name, geometry, density, mu, collide })
}

fn parse_joint(node: roxmltree::Node<'_, '_>) -> Result<JointDescription, SceneError> {
    let name = node.attribute("name").ok_or_else(|| SceneError::Urdf("joint without name".into()))?.to_string();
    let what = format!("joint {name}");
    let kind_name = node.attribute("type").unwrap_or("");
    let (kind, limited) = match kind_name {
        "fixed" => (JointKind::Fixed, false),
        "revolute" => (JointKind::Revolute, true),
        "continuous" => (JointKind::Revolute, false),
        "prismatic" => (JointKind::Prismatic, true),
        other => return Err(SceneError::UnsupportedJoint { joint: name, kind: other.to_string() }),
    };
    let link_attr = |tag: &str| {
        node.children()
            .find(|c| c.has_tag_name(tag))
            .and_then(|c| c.attribute("link"))
            .map(str::to_string)
            .ok_or_else(|| SceneError::Urdf(format!("{what} has no {tag} link")))
    };
    let parent = link_attr("parent")?;
    let child = link_attr("child")?;
    let axis = match node.children().find(|c| c.has_tag_name("axis")).and_then(|a| a.attribute("xyz")) {
        Some(t) => vec3(t, &what)?,
        None => Vec3::x(),
    };
    let n = axis.norm();
    if !(n > 0.0) {
        return Err(SceneError::Urdf(format!("{what} has a zero axis")));
    }
    let limits = if limited {
        let l = node
            .children()
            .find(|c| c.has_tag_name("limit"))
            .ok_or_else(|| SceneError::Urdf(format!("{what} ({kind_name}) needs a <limit>")))?;
        let lo = attr_f64(l, "lower", &what)?.unwrap_or(0.0);
        let hi = attr_f64(l, "upper", &what)?.unwrap_or(0.0);
        Some([lo, hi])
    } else {
        None
    };
    Ok(JointDescription { name, kind, parent, child, origin: origin(node, &what)?, axis: axis / n, limits })
}

/// Parses a robot document. Mesh paths are resolved against `base`.
pub fn parse_urdf(text: &str, base: &Path) -> Result<RobotDescription, SceneError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| SceneError::Urdf(e.to_string()))?;
    let robot = doc.root_element();
    if !robot.has_tag_name("robot") {
        return Err(SceneError::Urdf(format!("root element is <{}>, expected <robot>", robot.tag_name().name())));
    }
    let name = robot.attribute("name").unwrap_or("robot").to_string();
    let links = robot
        .children()
        .filter(|c| c.has_tag_name("link"))
        .map(|n| parse_link(n, base))
        .collect::<Result<Vec<_>, _>>()?;
    let joints = robot
        .children()
        .filter(|c| c.has_tag_name("joint"))
        .map(parse_joint)
        .collect::<Result<Vec<_>, _>>()?;

    let mut seen = HashSet::new();
    for l in &links {
        if !seen.insert(l.name.as_str()) {
            return Err(SceneError::Urdf(format!("duplicate link {}", l.name)));
        }
    }
    let mut parent_of: HashMap<&str, &str> = HashMap::new();
    for j in &joints {
        for l in [&j.parent, &j.child] {
            if !seen.contains(l.as_str()) {
                return Err(SceneError::Urdf(format!("joint {} references unknown link {l}", j.name)));
            }
        }
        if let Some(prev) = parent_of.insert(&j.child, &j.name) {
            return Err(SceneError::MultipleParents { link: j.child.clone(), joints: [prev.to_string(), j.name.clone()] });
        }
    }
    for j in &joints {
        // Walk up from each child; revisiting the start means a cycle.
        let mut at = j.child.as_str();
        let mut steps = 0;
        while let Some(&jn) = parent_of.get(at) {
            at = joints.iter().find(|k| k.name == jn).map(|k| k.parent.as_str()).unwrap_or(at);
            steps += 1;
            if at == j.child || steps > joints.len() {
                return Err(SceneError::Cycle { link: j.child.clone() });
            }
        }
    }
    let roots: Vec<&LinkDescription> = links.iter().filter(|l| !parent_of.contains_key(l.name.as_str())).collect();
    let root = match roots.as_slice() {
        [r] => r.name.clone(),
        [] => return Err(SceneError::Urdf("no root link".into())),
        many => {
            return Err(SceneError::Urdf(format!(
                "links {:?} are disconnected; a robot must be a single tree",
                many.iter().map(|l| &l.name).collect::<Vec<_>>()
            )))
        }
    };
    Ok(RobotDescription { name, links, joints, root })
}
