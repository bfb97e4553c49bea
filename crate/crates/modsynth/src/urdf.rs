//! URDF emission and the reverse mapping used for round-trip checks.
//!
//! Layout: a `world` root, a fixed `base_joint` carrying the base pose, then
//! `base_link`, revolute `joint_k` / `link_k` pairs, and a fixed `tool_joint`
//! to `tool0`. Capsules become a cylinder plus two spheres.

use std::collections::HashMap;
use std::fmt::Write;

use modsynth_core::collision::Shape;
use modsynth_core::composition::{Body, Joint};
use modsynth_core::library::Variant;
use modsynth_core::transform::{rotation_from_rpy, rpy_from_quat};
use modsynth_core::{torque_limit, Composition, KinematicChain, Primitive, RigidTransform};
use nalgebra::{Isometry3, Matrix3, Point3, Translation3, Vector3};

/// 12 significant digits; magnitudes below 1e-12 print as 0.
pub fn format_number(x: f64) -> String {
    if x.abs() < 1e-12 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn triple(v: [f64; 3]) -> String {
    v.map(format_number).join(" ")
}

fn origin(pose: &RigidTransform) -> String {
    let t = pose.translation.vector;
    format!(
        r#"<origin xyz="{}" rpy="{}"/>"#,
        triple([t.x, t.y, t.z]),
        triple(rpy_from_quat(&pose.rotation))
    )
}

fn geometry(out: &mut String, tag: &str, name: &str, pose: &RigidTransform, geom: &str) {
    writeln!(out, r#"    <{tag} name="{name}">"#).unwrap();
    writeln!(out, "      {}", origin(pose)).unwrap();
    writeln!(out, "      <geometry>{geom}</geometry>").unwrap();
    writeln!(out, "    </{tag}>").unwrap();
}

/// URDF geometry elements for one primitive: (suffix, pose, element).
fn lower(p: &Primitive) -> Vec<(&'static str, RigidTransform, String)> {
    match p.shape {
        Shape::Box { half_extents: h } => {
            vec![("", p.pose, format!(r#"<box size="{}"/>"#, triple([2.0 * h.x, 2.0 * h.y, 2.0 * h.z])))]
        }
        Shape::Sphere { radius } => {
            vec![("", p.pose, format!(r#"<sphere radius="{}"/>"#, format_number(radius)))]
        }
        Shape::Cylinder { radius, length } => vec![(
            "",
            p.pose,
            format!(r#"<cylinder radius="{}" length="{}"/>"#, format_number(radius), format_number(length)),
        )],
        Shape::Capsule { radius, length } => {
            let cap = |z: f64| {
                let c = p.pose * Point3::new(0.0, 0.0, z);
                Isometry3::from_parts(Translation3::from(c.coords), p.pose.rotation)
            };
            let sphere = format!(r#"<sphere radius="{}"/>"#, format_number(radius));
            vec![
                (
                    "_cyl",
                    p.pose,
                    format!(r#"<cylinder radius="{}" length="{}"/>"#, format_number(radius), format_number(length)),
                ),
                ("_cap0", cap(-0.5 * length), sphere.clone()),
                ("_cap1", cap(0.5 * length), sphere),
            ]
        }
    }
}

fn write_link(out: &mut String, name: &str, body: Option<&Body>, shapes: &[Primitive]) {
    writeln!(out, r#"  <link name="{name}">"#).unwrap();
    if let Some(b) = body {
        let c = b.center_of_mass;
        let i = &b.inertia;
        writeln!(out, "    <inertial>").unwrap();
        writeln!(out, r#"      <origin xyz="{}" rpy="0 0 0"/>"#, triple([c.x, c.y, c.z])).unwrap();
        writeln!(out, r#"      <mass value="{}"/>"#, format_number(b.mass)).unwrap();
        writeln!(
            out,
            r#"      <inertia ixx="{}" ixy="{}" ixz="{}" iyy="{}" iyz="{}" izz="{}"/>"#,
            format_number(i[(0, 0)]),
            format_number(i[(0, 1)]),
            format_number(i[(0, 2)]),
            format_number(i[(1, 1)]),
            format_number(i[(1, 2)]),
            format_number(i[(2, 2)])
        )
        .unwrap();
        writeln!(out, "    </inertial>").unwrap();
    }
    for (s, p) in shapes.iter().enumerate() {
        for (suffix, pose, geom) in lower(p) {
            let element = format!("{name}_shape{s}{suffix}");
            geometry(out, "visual", &element, &pose, &geom);
            geometry(out, "collision", &element, &pose, &geom);
        }
    }
    writeln!(out, "  </link>").unwrap();
}

/// URDF text for a chain built from `composition`. Output is a pure function
/// of its inputs.
pub fn emit_urdf(composition: &Composition, chain: &KinematicChain, name: &str) -> String {
    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0"?>"#).unwrap();
    writeln!(out, r#"<robot name="{}">"#, escape(name)).unwrap();
    writeln!(out, "  <!-- {} -->", composition.notation()).unwrap();
    writeln!(out, r#"  <link name="world"/>"#).unwrap();
    writeln!(out, r#"  <joint name="base_joint" type="fixed">"#).unwrap();
    writeln!(out, r#"    <parent link="world"/>"#).unwrap();
    writeln!(out, r#"    <child link="base_link"/>"#).unwrap();
    writeln!(out, "    {}", origin(&chain.base_pose)).unwrap();
    writeln!(out, "  </joint>").unwrap();
    write_link(&mut out, "base_link", None, &chain.base_shapes);
    for (k, (joint, body)) in chain.joints.iter().zip(&chain.bodies).enumerate() {
        let parent = if k == 0 { "base_link".to_string() } else { format!("link_{k}") };
        writeln!(out, r#"  <joint name="joint_{}" type="revolute">"#, k + 1).unwrap();
        writeln!(out, r#"    <parent link="{parent}"/>"#).unwrap();
        writeln!(out, r#"    <child link="link_{}"/>"#, k + 1).unwrap();
        writeln!(out, "    {}", origin(&joint.pre_transform)).unwrap();
        writeln!(out, r#"    <axis xyz="0 0 1"/>"#).unwrap();
        writeln!(
            out,
            r#"    <limit lower="{}" upper="{}" effort="{}" velocity="{}"/>"#,
            format_number(joint.limits.0),
            format_number(joint.limits.1),
            format_number(joint.effort_limit),
            format_number(joint.velocity_limit)
        )
        .unwrap();
        writeln!(out, "  </joint>").unwrap();
        write_link(&mut out, &format!("link_{}", k + 1), Some(body), &body.shapes);
    }
    writeln!(out, r#"  <joint name="tool_joint" type="fixed">"#).unwrap();
    writeln!(out, r#"    <parent link="link_{}"/>"#, chain.dof()).unwrap();
    writeln!(out, r#"    <child link="tool0"/>"#).unwrap();
    writeln!(out, "    {}", origin(&chain.tool)).unwrap();
    writeln!(out, "  </joint>").unwrap();
    writeln!(out, r#"  <link name="tool0"/>"#).unwrap();
    writeln!(out, "</robot>").unwrap();
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct UrdfError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, UrdfError> {
    Err(UrdfError(msg.into()))
}

fn numbers<const N: usize>(node: roxmltree::Node, attr: &str) -> Result<[f64; N], UrdfError> {
    let text = node.attribute(attr).unwrap_or(if N == 3 { "0 0 0" } else { "" });
    let values: Vec<f64> = text
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| UrdfError(format!("bad number in `{attr}`: {text}")))?;
    values
        .try_into()
        .map_err(|_| UrdfError(format!("`{attr}` needs {N} values: {text}")))
}

fn number(node: roxmltree::Node, attr: &str) -> Result<f64, UrdfError> {
    let [x] = numbers::<1>(node, attr)?;
    Ok(x)
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, tag: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(tag))
}

fn parse_origin(node: roxmltree::Node) -> Result<RigidTransform, UrdfError> {
    match child(node, "origin") {
        None => Ok(RigidTransform::identity()),
        Some(o) => {
            let [x, y, z] = numbers::<3>(o, "xyz")?;
            let [r, p, w] = numbers::<3>(o, "rpy")?;
            Ok(Isometry3::from_parts(Translation3::new(x, y, z), rotation_from_rpy(r, p, w)))
        }
    }
}

fn parse_collisions(link: roxmltree::Node) -> Result<Vec<Primitive>, UrdfError> {
    let mut shapes = Vec::new();
    for c in link.children().filter(|c| c.has_tag_name("collision")) {
        let pose = parse_origin(c)?;
        let Some(g) = child(c, "geometry").and_then(|g| g.children().find(|n| n.is_element())) else {
            return err("collision without geometry");
        };
        let shape = match g.tag_name().name() {
            "box" => Shape::Box {
                half_extents: Vector3::from(numbers::<3>(g, "size")?) * 0.5,
            },
            "sphere" => Shape::Sphere {
                radius: number(g, "radius")?,
            },
            "cylinder" => Shape::Cylinder {
                radius: number(g, "radius")?,
                length: number(g, "length")?,
            },
            other => return err(format!("unsupported geometry `{other}`")),
        };
        shapes.push((c.attribute("name").unwrap_or_default(), Primitive::new(shape, pose)));
    }
    // Capsules are written as a cylinder plus two end spheres; put them back
    // together when the names say so.
    let mut out = Vec::with_capacity(shapes.len());
    let mut i = 0;
    while i < shapes.len() {
        let (name, p) = &shapes[i];
        if let (Some(stem), Shape::Cylinder { radius, length }, Some((a, _)), Some((b, _))) =
            (name.strip_suffix("_cyl"), p.shape, shapes.get(i + 1), shapes.get(i + 2))
        {
            if *a == format!("{stem}_cap0") && *b == format!("{stem}_cap1") {
                out.push(Primitive::new(Shape::Capsule { radius, length }, p.pose));
                i += 3;
                continue;
            }
        }
        out.push(*p);
        i += 1;
    }
    Ok(out)
}

fn parse_body(link: roxmltree::Node) -> Result<Body, UrdfError> {
    let mut body = Body::empty();
    body.shapes = parse_collisions(link)?;
    if let Some(inertial) = child(link, "inertial") {
        let frame = parse_origin(inertial)?;
        let mass = child(inertial, "mass").map(|m| number(m, "value")).transpose()?.unwrap_or(0.0);
        let Some(i) = child(inertial, "inertia") else {
            return err("inertial without inertia");
        };
        let v = |a| number(i, a);
        let (xx, xy, xz, yy, yz, zz) = (v("ixx")?, v("ixy")?, v("ixz")?, v("iyy")?, v("iyz")?, v("izz")?);
        let local = Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz);
        let r = frame.rotation.to_rotation_matrix();
        body.mass = mass;
        body.center_of_mass = frame.translation.vector;
        body.inertia = r.matrix() * local * r.matrix().transpose();
    }
    Ok(body)
}

/// Rebuilds a chain from URDF text of the shape [`emit_urdf`] writes: one
/// serial chain of revolute joints about local z, fixed joints allowed
/// before the first and after the last revolute joint.
pub fn chain_from_urdf(text: &str) -> Result<KinematicChain, UrdfError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| UrdfError(e.to_string()))?;
    let robot = doc.root_element();
    if !robot.has_tag_name("robot") {
        return err("root element is not <robot>");
    }
    let links: HashMap<&str, roxmltree::Node> = robot
        .children()
        .filter(|n| n.has_tag_name("link"))
        .filter_map(|n| n.attribute("name").map(|name| (name, n)))
        .collect();
    let mut by_parent: HashMap<&str, roxmltree::Node> = HashMap::new();
    let mut children = Vec::new();
    for j in robot.children().filter(|n| n.has_tag_name("joint")) {
        let parent = child(j, "parent").and_then(|p| p.attribute("link"));
        let kid = child(j, "child").and_then(|p| p.attribute("link"));
        let (Some(parent), Some(kid)) = (parent, kid) else {
            return err("joint without parent or child");
        };
        if by_parent.insert(parent, j).is_some() {
            return err(format!("link `{parent}` has several child joints; not a serial chain"));
        }
        children.push(kid);
    }
    let roots: Vec<&str> = links.keys().copied().filter(|l| !children.contains(l)).collect();
    let [root] = roots.as_slice() else {
        return err(format!("expected exactly one root link, found {}", roots.len()));
    };

    let mut chain = KinematicChain {
        base_pose: RigidTransform::identity(),
        base_shapes: parse_collisions(links[root])?,
        joints: Vec::new(),
        bodies: Vec::new(),
        tool: RigidTransform::identity(),
    };
    // Fixed transform accumulated since the last revolute joint (or the root).
    let mut pending = RigidTransform::identity();
    let mut current = *root;
    while let Some(j) = by_parent.get(current) {
        let next = child(*j, "child").and_then(|c| c.attribute("link")).unwrap_or_default();
        let Some(link) = links.get(next) else {
            return err(format!("joint refers to unknown link `{next}`"));
        };
        let transform = pending * parse_origin(*j)?;
        match j.attribute("type") {
            Some("fixed") => {
                pending = transform;
                if chain.joints.is_empty() {
                    chain.base_shapes.extend(parse_collisions(*link)?);
                }
            }
            Some("revolute") => {
                let axis = child(*j, "axis").map(|a| numbers::<3>(a, "xyz")).transpose()?.unwrap_or([1.0, 0.0, 0.0]);
                if Vector3::from(axis) != Vector3::z() {
                    return err("only joint axes along local z are supported");
                }
                let Some(limit) = child(*j, "limit") else {
                    return err("revolute joint without <limit>");
                };
                let effort = number(limit, "effort")?;
                // Everything fixed before the first joint is the base placement.
                let pre_transform = if chain.joints.is_empty() {
                    chain.base_pose = pending;
                    parse_origin(*j)?
                } else {
                    transform
                };
                chain.joints.push(Joint {
                    pre_transform,
                    variant: variant_for(effort),
                    limits: (number(limit, "lower")?, number(limit, "upper")?),
                    effort_limit: effort,
                    velocity_limit: number(limit, "velocity")?,
                });
                chain.bodies.push(parse_body(*link)?);
                pending = RigidTransform::identity();
            }
            other => return err(format!("unsupported joint type {other:?}")),
        }
        current = next;
    }
    if chain.joints.is_empty() {
        return err("no revolute joints");
    }
    chain.tool = pending;
    Ok(chain)
}

/// URDF carries no module variant; infer it from the catalog effort limit.
fn variant_for(effort: f64) -> Variant {
    if (effort - torque_limit(Variant::Heavy)).abs() < (effort - torque_limit(Variant::Light)).abs() {
        Variant::Heavy
    } else {
        Variant::Light
    }
}
