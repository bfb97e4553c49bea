//! The modular library: actuator catalog, modular units, link types,
//! geometry configuration and the assembly rules.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{MAX_DOF, MIN_DOF};

/// Joint-module variant, named after the actuator it carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Heavy module (KA-75+ actuator).
    #[serde(rename = "H")]
    Heavy,
    /// Light module (KA-58 actuator).
    #[serde(rename = "L")]
    Light,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Heavy, Variant::Light];

    pub fn letter(self) -> char {
        match self {
            Variant::Heavy => 'H',
            Variant::Light => 'L',
        }
    }
}

/// A value carried separately for each module variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerVariant<T> {
    #[serde(rename = "H")]
    pub heavy: T,
    #[serde(rename = "L")]
    pub light: T,
}

impl<T> PerVariant<T> {
    pub fn get(&self, variant: Variant) -> &T {
        match variant {
            Variant::Heavy => &self.heavy,
            Variant::Light => &self.light,
        }
    }
}

/// Catalog entry for an actuator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorSpec {
    /// kg
    pub mass: f64,
    /// Output speed in revolutions per minute.
    pub rated_speed_rpm: f64,
    /// N·m
    pub nominal_torque: f64,
    /// N·m
    pub max_torque: f64,
    /// Maximum number of modules of this variant in one composition.
    pub epsilon: u8,
}

impl ActuatorSpec {
    pub const HEAVY: ActuatorSpec = ActuatorSpec {
        mass: 0.57,
        rated_speed_rpm: 12.2,
        nominal_torque: 12.0,
        max_torque: 30.5,
        epsilon: 3,
    };

    pub const LIGHT: ActuatorSpec = ActuatorSpec {
        mass: 0.357,
        rated_speed_rpm: 20.3,
        nominal_torque: 3.6,
        max_torque: 6.8,
        epsilon: 3,
    };

    pub fn catalog(variant: Variant) -> ActuatorSpec {
        match variant {
            Variant::Heavy => Self::HEAVY,
            Variant::Light => Self::LIGHT,
        }
    }

    /// Rated speed converted to rad/s.
    pub fn velocity_limit(&self) -> f64 {
        self.rated_speed_rpm * 2.0 * PI / 60.0
    }
}

/// Nominal torque limit of a variant from the catalog, in N·m.
pub fn torque_limit(variant: Variant) -> f64 {
    ActuatorSpec::catalog(variant).nominal_torque
}

/// Link module types: straight (`S1`, `S2`) and curved (`C1`, `C2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkType {
    S1,
    S2,
    C1,
    C2,
}

impl LinkType {
    pub const ALL: [LinkType; 4] = [LinkType::S1, LinkType::S2, LinkType::C1, LinkType::C2];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(index: u8) -> Option<LinkType> {
        Self::ALL.get(index as usize).copied()
    }

    pub fn is_curved(self) -> bool {
        matches!(self, LinkType::C1 | LinkType::C2)
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkType::S1 => "S1",
            LinkType::S2 => "S2",
            LinkType::C1 => "C1",
            LinkType::C2 => "C2",
        }
    }
}

/// Geometry and mass of a link type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    /// Straight length, or chord for curved links (m).
    pub length: f64,
    /// Output-port bend in degrees; zero for straight links.
    #[serde(default)]
    pub bend_angle: f64,
    /// kg
    pub mass: f64,
    /// Visual radius (m).
    #[serde(default = "default_link_radius")]
    pub radius: f64,
}

fn default_link_radius() -> f64 {
    0.025
}

/// Which input port a modular unit uses and whether it carries a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnitKind {
    /// Connected through `Ip1`, no link.
    Ip1,
    /// Connected through `Ip2`, no link.
    Ip2,
    /// Connected through `Ip1`, link at the output port.
    Ip1Link,
    /// Connected through `Ip2`, link at the output port.
    Ip2Link,
}

impl UnitKind {
    pub const ALL: [UnitKind; 4] = [
        UnitKind::Ip1,
        UnitKind::Ip2,
        UnitKind::Ip1Link,
        UnitKind::Ip2Link,
    ];

    /// The superscript k in `H^k` / `L^k`.
    pub fn index(self) -> u8 {
        match self {
            UnitKind::Ip1 => 1,
            UnitKind::Ip2 => 2,
            UnitKind::Ip1Link => 3,
            UnitKind::Ip2Link => 4,
        }
    }

    pub fn from_index(k: u8) -> Option<UnitKind> {
        match k {
            1 => Some(UnitKind::Ip1),
            2 => Some(UnitKind::Ip2),
            3 => Some(UnitKind::Ip1Link),
            4 => Some(UnitKind::Ip2Link),
            _ => None,
        }
    }

    pub fn has_link(self) -> bool {
        matches!(self, UnitKind::Ip1Link | UnitKind::Ip2Link)
    }

    pub fn uses_second_port(self) -> bool {
        matches!(self, UnitKind::Ip2 | UnitKind::Ip2Link)
    }

    /// Skew rotation about the twist-1 x axis implied by the port (degrees).
    pub fn skew_deg(self) -> f64 {
        if self.uses_second_port() {
            90.0
        } else {
            0.0
        }
    }
}

impl Serialize for UnitKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.index())
    }
}

impl<'de> Deserialize<'de> for UnitKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let k = u8::deserialize(d)?;
        UnitKind::from_index(k)
            .ok_or_else(|| serde::de::Error::custom("unit kind must be 1, 2, 3 or 4"))
    }
}

/// Intersecting-twist angles available on the twist unit, in degrees.
pub const TWIST_LATTICE_DEG: [i16; 10] = [-45, -30, -15, 0, 15, 30, 45, 60, 75, 90];

/// Index of 0° in [`TWIST_LATTICE_DEG`].
pub const ZERO_TWIST_INDEX: u8 = 3;

/// An intersecting-twist setting, stored as its lattice index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Twist(u8);

impl Twist {
    pub const ZERO: Twist = Twist(ZERO_TWIST_INDEX);

    pub fn from_index(index: u8) -> Option<Twist> {
        ((index as usize) < TWIST_LATTICE_DEG.len()).then_some(Twist(index))
    }

    pub fn from_degrees(deg: i16) -> Option<Twist> {
        TWIST_LATTICE_DEG
            .iter()
            .position(|&d| d == deg)
            .map(|i| Twist(i as u8))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn degrees(self) -> i16 {
        TWIST_LATTICE_DEG[self.0 as usize]
    }

    pub fn radians(self) -> f64 {
        f64::from(self.degrees()).to_radians()
    }
}

impl Serialize for Twist {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i16(self.degrees())
    }
}

impl<'de> Deserialize<'de> for Twist {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let deg = i16::deserialize(d)?;
        Twist::from_degrees(deg).ok_or_else(|| {
            serde::de::Error::custom("twist must be one of -45..90 in steps of 15 degrees")
        })
    }
}

/// One joint module with its port choice, twist setting and optional link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModularUnit {
    pub variant: Variant,
    pub kind: UnitKind,
    #[serde(rename = "twist_deg")]
    pub twist: Twist,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkType>,
}

impl ModularUnit {
    /// Builds a unit, checking that a link is present exactly for kinds 3 and 4.
    pub fn new(
        variant: Variant,
        kind: UnitKind,
        twist: Twist,
        link: Option<LinkType>,
    ) -> Result<Self, UnitError> {
        if kind.has_link() != link.is_some() {
            return Err(UnitError::LinkMismatch { kind: kind.index() });
        }
        Ok(ModularUnit {
            variant,
            kind,
            twist,
            link,
        })
    }

    /// Shorthand for the tests and fixtures: `unit('H', 4, -45, Some(S2))`.
    pub fn parse(variant: char, kind: u8, twist_deg: i16, link: Option<LinkType>) -> Self {
        let variant = match variant {
            'H' => Variant::Heavy,
            'L' => Variant::Light,
            other => panic!("unknown variant {other}"),
        };
        let kind = UnitKind::from_index(kind).expect("kind in 1..=4");
        let twist = Twist::from_degrees(twist_deg).expect("twist on the lattice");
        Self::new(variant, kind, twist, link).expect("consistent link")
    }
}

impl fmt::Display for ModularUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.variant.letter(), self.kind.index())?;
        let deg = self.twist.degrees();
        match (deg, self.link) {
            (0, None) => Ok(()),
            (0, Some(l)) => write!(f, "[{}]", l.name()),
            (d, None) => write!(f, "({d})"),
            (d, Some(l)) => write!(f, "({d},{})", l.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("unit kind {kind} requires a link iff kind is 3 or 4")]
    LinkMismatch { kind: u8 },
}

/// Per-variant module geometry. Lengths in meters, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleGeometry {
    /// Twist-2 pivot to joint frame (along the joint axis).
    pub body_length: PerVariant<f64>,
    pub body_radius: PerVariant<f64>,
    /// Input port (twist-1 frame) to twist-2 pivot.
    pub twist_unit_offset: PerVariant<f64>,
    /// Added to every visual radius for collision capsules.
    pub collision_padding: f64,
    /// Symmetric joint range `[-limit, +limit]` per variant.
    pub joint_limit: PerVariant<f64>,
}

impl Default for ModuleGeometry {
    fn default() -> Self {
        ModuleGeometry {
            body_length: PerVariant {
                heavy: 0.12,
                light: 0.09,
            },
            body_radius: PerVariant {
                heavy: 0.035,
                light: 0.03,
            },
            twist_unit_offset: PerVariant {
                heavy: 0.05,
                light: 0.04,
            },
            collision_padding: 0.005,
            joint_limit: PerVariant { heavy: PI, light: PI },
        }
    }
}

/// Link table keyed by link type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkTable {
    #[serde(rename = "S1")]
    pub s1: LinkSpec,
    #[serde(rename = "S2")]
    pub s2: LinkSpec,
    #[serde(rename = "C1")]
    pub c1: LinkSpec,
    #[serde(rename = "C2")]
    pub c2: LinkSpec,
}

impl LinkTable {
    pub fn get(&self, link: LinkType) -> &LinkSpec {
        match link {
            LinkType::S1 => &self.s1,
            LinkType::S2 => &self.s2,
            LinkType::C1 => &self.c1,
            LinkType::C2 => &self.c2,
        }
    }
}

impl Default for LinkTable {
    fn default() -> Self {
        let straight = |length| LinkSpec {
            length,
            bend_angle: 0.0,
            mass: 0.08,
            radius: default_link_radius(),
        };
        let curved = |bend_angle| LinkSpec {
            length: 0.12,
            bend_angle,
            mass: 0.08,
            radius: default_link_radius(),
        };
        LinkTable {
            s1: straight(0.10),
            s2: straight(0.15),
            c1: curved(90.0),
            c2: curved(-90.0),
        }
    }
}

/// Complete library configuration. Immutable once loaded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LibraryConfig {
    pub actuators: PerVariant<ActuatorSpec>,
    pub links: LinkTable,
    pub geometry: ModuleGeometry,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig {
            actuators: PerVariant {
                heavy: ActuatorSpec::HEAVY,
                light: ActuatorSpec::LIGHT,
            },
            links: LinkTable::default(),
            geometry: ModuleGeometry::default(),
        }
    }
}

/// A configuration value that failed validation, named by its dotted path.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid library field `{field}`: {reason}")]
pub struct LibraryError {
    pub field: alloc::string::String,
    pub reason: &'static str,
}

impl LibraryConfig {
    pub fn actuator(&self, variant: Variant) -> &ActuatorSpec {
        self.actuators.get(variant)
    }

    pub fn link(&self, link: LinkType) -> &LinkSpec {
        self.links.get(link)
    }

    /// Checks every dimension and catalog invariant.
    pub fn validate(&self) -> Result<(), LibraryError> {
        use alloc::format;
        let bad = |field: alloc::string::String, reason| Err(LibraryError { field, reason });
        for v in Variant::ALL {
            let a = self.actuator(v);
            let name = v.letter();
            for (field, value) in [
                ("mass", a.mass),
                ("rated_speed_rpm", a.rated_speed_rpm),
                ("nominal_torque", a.nominal_torque),
                ("max_torque", a.max_torque),
            ] {
                if !(value > 0.0 && value.is_finite()) {
                    return bad(format!("actuators.{name}.{field}"), "must be positive");
                }
            }
            if a.nominal_torque >= a.max_torque {
                return bad(
                    format!("actuators.{name}.nominal_torque"),
                    "must be below max_torque",
                );
            }
            if a.epsilon == 0 {
                return bad(format!("actuators.{name}.epsilon"), "must be at least 1");
            }
            let g = &self.geometry;
            for (field, value) in [
                ("body_length", *g.body_length.get(v)),
                ("body_radius", *g.body_radius.get(v)),
                ("twist_unit_offset", *g.twist_unit_offset.get(v)),
                ("joint_limit", *g.joint_limit.get(v)),
            ] {
                if !(value > 0.0 && value.is_finite()) {
                    return bad(format!("geometry.{field}.{name}"), "must be positive");
                }
            }
        }
        if !(self.geometry.collision_padding >= 0.0) {
            return bad(
                "geometry.collision_padding".into(),
                "must be non-negative",
            );
        }
        for l in LinkType::ALL {
            let spec = self.link(l);
            let name = l.name();
            for (field, value) in [
                ("length", spec.length),
                ("mass", spec.mass),
                ("radius", spec.radius),
            ] {
                if !(value > 0.0 && value.is_finite()) {
                    return bad(format!("links.{name}.{field}"), "must be positive");
                }
            }
            if l.is_curved() == (spec.bend_angle == 0.0) {
                return bad(
                    format!("links.{name}.bend_angle"),
                    "must be zero for straight links and non-zero for curved links",
                );
            }
        }
        Ok(())
    }

    /// Assembly rules checked against this library's epsilon values.
    pub fn validate_assembly(&self, units: &[ModularUnit]) -> Result<ValidationReport, AssemblyError> {
        check_assembly(
            units,
            self.actuators.heavy.epsilon,
            self.actuators.light.epsilon,
        )
    }
}

/// The four assembly rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AssemblyRule {
    /// The first module is Heavy.
    R1,
    /// With more than three modules the last one is Light.
    R2,
    /// No Heavy module after a Light one.
    R3,
    /// At most epsilon modules of each variant.
    R4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleViolation {
    pub rule: AssemblyRule,
    /// Position (0-based) of the offending unit.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<RuleViolation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, rule: AssemblyRule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    /// Distinct rules broken, in rule order.
    pub fn rules(&self) -> Vec<AssemblyRule> {
        let mut rules: Vec<_> = self.violations.iter().map(|v| v.rule).collect();
        rules.sort();
        rules.dedup();
        rules
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssemblyError {
    #[error("a composition needs between 2 and 6 modules, got {0}")]
    Length(usize),
}

/// Checks a unit sequence against rules R1-R4 with the catalog epsilon.
pub fn validate_assembly(units: &[ModularUnit]) -> Result<ValidationReport, AssemblyError> {
    check_assembly(units, ActuatorSpec::HEAVY.epsilon, ActuatorSpec::LIGHT.epsilon)
}

fn check_assembly(
    units: &[ModularUnit],
    epsilon_heavy: u8,
    epsilon_light: u8,
) -> Result<ValidationReport, AssemblyError> {
    let n = units.len();
    if !(MIN_DOF..=MAX_DOF).contains(&n) {
        return Err(AssemblyError::Length(n));
    }
    let mut violations = Vec::new();
    if units[0].variant != Variant::Heavy {
        violations.push(RuleViolation {
            rule: AssemblyRule::R1,
            index: 0,
        });
    }
    if n > 3 && units[n - 1].variant != Variant::Light {
        violations.push(RuleViolation {
            rule: AssemblyRule::R2,
            index: n - 1,
        });
    }
    let mut seen_light = false;
    for (i, u) in units.iter().enumerate() {
        match u.variant {
            Variant::Light => seen_light = true,
            Variant::Heavy if seen_light => violations.push(RuleViolation {
                rule: AssemblyRule::R3,
                index: i,
            }),
            Variant::Heavy => {}
        }
    }
    let (mut heavy, mut light) = (0u8, 0u8);
    for (i, u) in units.iter().enumerate() {
        let (count, limit) = match u.variant {
            Variant::Heavy => (&mut heavy, epsilon_heavy),
            Variant::Light => (&mut light, epsilon_light),
        };
        *count += 1;
        if *count == limit + 1 {
            violations.push(RuleViolation {
                rule: AssemblyRule::R4,
                index: i,
            });
        }
    }
    Ok(ValidationReport { violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use AssemblyRule::*;

    fn u(v: char, k: u8, t: i16, l: Option<LinkType>) -> ModularUnit {
        ModularUnit::parse(v, k, t, l)
    }

    #[test]
    fn catalog_values() {
        assert_eq!(torque_limit(Variant::Heavy), 12.0);
        assert_eq!(torque_limit(Variant::Light), 3.6);
        for v in Variant::ALL {
            let a = ActuatorSpec::catalog(v);
            assert!(a.nominal_torque < a.max_torque);
            assert_eq!(a.epsilon, 3);
        }
        assert_eq!(ActuatorSpec::HEAVY.mass, 0.57);
        assert_eq!(ActuatorSpec::LIGHT.mass, 0.357);
        assert!((ActuatorSpec::HEAVY.velocity_limit() - 1.2776).abs() < 1e-4);
        assert!((ActuatorSpec::LIGHT.velocity_limit() - 2.1258).abs() < 1e-4);
    }

    #[test]
    fn twist_lattice_has_ten_values_fifteen_apart() {
        assert_eq!(TWIST_LATTICE_DEG.len(), 10);
        assert_eq!(TWIST_LATTICE_DEG[0], -45);
        assert_eq!(TWIST_LATTICE_DEG[9], 90);
        assert!(TWIST_LATTICE_DEG.windows(2).all(|w| w[1] - w[0] == 15));
        assert_eq!(Twist::ZERO.degrees(), 0);
        assert!(Twist::from_degrees(20).is_none());
    }

    #[test]
    fn case_compositions_are_valid() {
        let a = [
            u('H', 1, 0, None),
            u('H', 4, -45, Some(LinkType::S2)),
            u('H', 3, 45, Some(LinkType::C2)),
        ];
        assert!(validate_assembly(&a).unwrap().ok());
        let b = [
            u('H', 1, 0, None),
            u('H', 2, 15, None),
            u('L', 2, 0, None),
            u('L', 1, -45, None),
            u('L', 2, 60, None),
        ];
        assert!(validate_assembly(&b).unwrap().ok());
    }

    #[test]
    fn rule_violations_are_listed() {
        let r = validate_assembly(&[u('L', 1, 0, None), u('H', 2, 0, None)]).unwrap();
        assert_eq!(r.rules(), vec![R1, R3]);
        let r = validate_assembly(&[
            u('H', 1, 0, None),
            u('H', 2, 0, None),
            u('H', 3, 0, Some(LinkType::S1)),
            u('H', 4, 0, Some(LinkType::S1)),
        ])
        .unwrap();
        assert_eq!(r.rules(), vec![R2, R4]);
        assert_eq!(r.violations.iter().find(|v| v.rule == R4).unwrap().index, 3);
    }

    #[test]
    fn r2_inactive_up_to_three_modules() {
        let r = validate_assembly(&[u('H', 1, 0, None), u('H', 2, 0, None), u('H', 2, 0, None)])
            .unwrap();
        assert!(r.ok());
    }

    #[test]
    fn length_out_of_range_is_an_error() {
        assert_eq!(validate_assembly(&[]), Err(AssemblyError::Length(0)));
        assert_eq!(
            validate_assembly(&[u('H', 1, 0, None)]),
            Err(AssemblyError::Length(1))
        );
        let seven = [u('H', 1, 0, None); 7];
        assert_eq!(validate_assembly(&seven), Err(AssemblyError::Length(7)));
    }

    #[test]
    fn link_presence_must_match_kind() {
        assert!(ModularUnit::new(Variant::Heavy, UnitKind::Ip1, Twist::ZERO, Some(LinkType::S1)).is_err());
        assert!(ModularUnit::new(Variant::Heavy, UnitKind::Ip2Link, Twist::ZERO, None).is_err());
    }

    #[test]
    fn default_library_validates() {
        let lib = LibraryConfig::default();
        lib.validate().unwrap();
        let mut broken = lib;
        broken.links.s2.length = -0.1;
        let err = broken.validate().unwrap_err();
        assert_eq!(err.field, "links.S2.length");
    }

    #[test]
    fn display_uses_paper_notation() {
        use alloc::string::ToString;
        assert_eq!(u('H', 4, -45, Some(LinkType::S2)).to_string(), "H4(-45,S2)");
        assert_eq!(u('L', 2, 0, None).to_string(), "L2");
    }
}
