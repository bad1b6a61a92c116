//! URDF reading and writing for the supported subset: links with visual
//! geometry (mesh, box, cylinder, sphere) and revolute, continuous,
//! prismatic and fixed joints with origin, axis and limit.

use std::fmt::Write as _;

use nalgebra::Vector3;
use roxmltree::{Document, Node};

use super::{Joint, JointKind, JointLimits, Link, ModelError, RobotModel, Shape};
use crate::kinematics::RigidTransform;

/// Parses a URDF document into a validated [`RobotModel`].
///
/// Mesh references are kept as file names; see [`super::RobotGeometry`] for
/// loading them. Elements outside the supported subset are skipped and listed
/// in [`RobotModel::warnings`], along with any soft-invariant diagnostics.
pub fn parse_urdf(document: &str) -> Result<RobotModel, ModelError> {
    let doc = Document::parse(document).map_err(|e| ModelError::MalformedXml(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(ModelError::MalformedXml(format!(
            "root element is <{}>, expected <robot>",
            robot.tag_name().name()
        )));
    }
    let name = robot.attribute("name").unwrap_or("").to_string();

    let mut warnings = Vec::new();
    let mut links = Vec::new();
    let mut joints = Vec::new();
    for node in robot.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "link" => links.push(parse_link(node, &mut warnings)?),
            "joint" => joints.push(parse_joint(node)?),
            // materials only carry appearance; nothing to record
            "material" => {}
            other => warnings.push(format!("ignored unsupported element <{other}>")),
        }
    }

    let model = RobotModel::new(&name, links, joints)?;
    warnings.extend(
        model
            .validate()
            .into_iter()
            .map(|d| format!("{}: {}", d.element, d.message)),
    );
    Ok(model.with_warnings(warnings))
}

fn required<'a>(node: Node<'a, '_>, attr: &str) -> Result<&'a str, ModelError> {
    node.attribute(attr).ok_or_else(|| ModelError::InvalidAttribute {
        element: node.tag_name().name().to_string(),
        attribute: attr.to_string(),
        reason: "missing".to_string(),
    })
}

fn parse_floats<const N: usize>(node: Node, attr: &str, default: Option<[f64; N]>) -> Result<[f64; N], ModelError> {
    let err = |reason: String| ModelError::InvalidAttribute {
        element: node.tag_name().name().to_string(),
        attribute: attr.to_string(),
        reason,
    };
    let Some(text) = node.attribute(attr) else {
        return default.ok_or_else(|| err("missing".to_string()));
    };
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|e| err(format!("'{s}': {e}"))))
        .collect::<Result<_, _>>()?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| err(format!("expected {N} values, found {}", v.len())))
}

fn parse_scalar(node: Node, attr: &str) -> Result<f64, ModelError> {
    Ok(parse_floats::<1>(node, attr, None)?[0])
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == tag)
}

fn parse_origin(parent: Node) -> Result<RigidTransform, ModelError> {
    match child(parent, "origin") {
        None => Ok(RigidTransform::identity()),
        Some(o) => {
            let xyz = parse_floats(o, "xyz", Some([0.0; 3]))?;
            let rpy = parse_floats(o, "rpy", Some([0.0; 3]))?;
            Ok(RigidTransform::from_xyz_rpy(xyz, rpy))
        }
    }
}

fn parse_link(node: Node, warnings: &mut Vec<String>) -> Result<Link, ModelError> {
    let mut link = Link::new(required(node, "name")?);
    for visual in node
        .children()
        .filter(|c| c.is_element() && c.tag_name().name() == "visual")
    {
        let origin = parse_origin(visual)?;
        let Some(geometry) = child(visual, "geometry") else {
            warnings.push(format!("link '{}': visual without <geometry>", link.name));
            continue;
        };
        let Some(shape_node) = geometry.children().find(Node::is_element) else {
            warnings.push(format!("link '{}': empty <geometry>", link.name));
            continue;
        };
        let shape = match shape_node.tag_name().name() {
            "mesh" => Shape::Mesh {
                filename: required(shape_node, "filename")?.to_string(),
                scale: parse_floats(shape_node, "scale", Some([1.0; 3]))?,
            },
            "box" => Shape::Box {
                size: parse_floats(shape_node, "size", None)?,
            },
            "cylinder" => Shape::Cylinder {
                radius: parse_scalar(shape_node, "radius")?,
                length: parse_scalar(shape_node, "length")?,
            },
            "sphere" => Shape::Sphere {
                radius: parse_scalar(shape_node, "radius")?,
            },
            other => {
                warnings.push(format!("link '{}': unsupported geometry <{other}>", link.name));
                continue;
            }
        };
        link = link.with_visual(origin, shape);
    }
    Ok(link)
}

fn parse_joint(node: Node) -> Result<Joint, ModelError> {
    let name = required(node, "name")?.to_string();
    let kind_str = required(node, "type")?;
    let kind = JointKind::from_urdf(kind_str).ok_or_else(|| ModelError::UnknownJointType {
        joint: name.clone(),
        kind: kind_str.to_string(),
    })?;
    let link_ref = |tag: &str| -> Result<String, ModelError> {
        let n = child(node, tag).ok_or_else(|| ModelError::InvalidAttribute {
            element: format!("joint '{name}'"),
            attribute: tag.to_string(),
            reason: "missing".to_string(),
        })?;
        Ok(required(n, "link")?.to_string())
    };
    let parent = link_ref("parent")?;
    let child_link = link_ref("child")?;
    let origin = parse_origin(node)?;
    let axis = match child(node, "axis") {
        Some(a) => Vector3::from(parse_floats(a, "xyz", Some([1.0, 0.0, 0.0]))?),
        None => Vector3::x(),
    };
    let limits = match (kind, child(node, "limit")) {
        (JointKind::Revolute | JointKind::Prismatic, Some(l)) => match (l.attribute("lower"), l.attribute("upper")) {
            (None, None) => None,
            _ => Some(JointLimits::new(
                parse_floats(l, "lower", Some([0.0]))?[0],
                parse_floats(l, "upper", Some([0.0]))?[0],
            )),
        },
        _ => None,
    };
    Ok(Joint {
        name,
        kind,
        parent,
        child: child_link,
        origin,
        axis,
        limits,
    })
}

fn fmt3(v: [f64; 3]) -> String {
    format!("{} {} {}", v[0], v[1], v[2])
}

fn write_origin(out: &mut String, indent: &str, t: &RigidTransform) {
    if *t == RigidTransform::identity() {
        return;
    }
    let _ = writeln!(
        out,
        "{indent}<origin xyz=\"{}\" rpy=\"{}\"/>",
        fmt3(t.translation_array()),
        fmt3(t.rpy())
    );
}

/// Serializes a model back to URDF. Floats use the shortest representation
/// that parses back to the same value.
pub fn to_urdf(model: &RobotModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "<?xml version=\"1.0\"?>");
    let _ = writeln!(out, "<robot name=\"{}\">", xml_escape(model.name()));
    for link in model.links() {
        if link.visuals.is_empty() {
            let _ = writeln!(out, "  <link name=\"{}\"/>", xml_escape(&link.name));
            continue;
        }
        let _ = writeln!(out, "  <link name=\"{}\">", xml_escape(&link.name));
        for v in &link.visuals {
            let _ = writeln!(out, "    <visual>");
            write_origin(&mut out, "      ", &v.origin);
            let _ = writeln!(out, "      <geometry>");
            let shape = match &v.shape {
                Shape::Mesh { filename, scale } => format!(
                    "<mesh filename=\"{}\" scale=\"{}\"/>",
                    xml_escape(filename),
                    fmt3(*scale)
                ),
                Shape::Box { size } => format!("<box size=\"{}\"/>", fmt3(*size)),
                Shape::Cylinder { radius, length } => {
                    format!("<cylinder radius=\"{radius}\" length=\"{length}\"/>")
                }
                Shape::Sphere { radius } => format!("<sphere radius=\"{radius}\"/>"),
            };
            let _ = writeln!(out, "        {shape}");
            let _ = writeln!(out, "      </geometry>");
            let _ = writeln!(out, "    </visual>");
        }
        let _ = writeln!(out, "  </link>");
    }
    for j in model.joints() {
        let _ = writeln!(
            out,
            "  <joint name=\"{}\" type=\"{}\">",
            xml_escape(&j.name),
            j.kind.as_urdf()
        );
        let _ = writeln!(out, "    <parent link=\"{}\"/>", xml_escape(&j.parent));
        let _ = writeln!(out, "    <child link=\"{}\"/>", xml_escape(&j.child));
        write_origin(&mut out, "    ", &j.origin);
        if j.kind.is_actuated() {
            let _ = writeln!(out, "    <axis xyz=\"{}\"/>", fmt3([j.axis.x, j.axis.y, j.axis.z]));
        }
        if let Some(l) = j.limits {
            let _ = writeln!(
                out,
                "    <limit lower=\"{}\" upper=\"{}\" effort=\"0\" velocity=\"0\"/>",
                l.lower, l.upper
            );
        }
        let _ = writeln!(out, "  </joint>");
    }
    let _ = writeln!(out, "</robot>");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
