//! Structured polar-grid triangulations of the rotor and stator annuli.
//!
//! Every subdomain is a ring-by-sector grid. A mesh line sits exactly on every
//! material radius, so each triangle lies inside a single region. Ring radii are
//! log-spaced inside each radial band, which keeps cells close to square.
//! Quads are split along alternating diagonals (even sector: inner-left to
//! outer-right). That pattern repeats every two sectors and is mirror symmetric
//! about the sector lines, so a mesh with an even number of sectors per symmetry
//! sector reproduces the rotational and mirror symmetry of the machine exactly.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::machine_model::{wrap_angle, MachineConfig, Point, RegionTag, Side};

#[derive(Debug, Clone)]
pub struct Mesh {
    pub side: Side,
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub tags: Vec<RegionTag>,
    /// Nodes with `a = 0` (inner rotor circle or outer stator circle).
    pub dirichlet_nodes: Vec<usize>,
    /// Nodes on the coupling circle, ordered by increasing angle.
    pub interface_nodes: Vec<usize>,
    /// Rotation angle mapping the mesh onto itself (with magnet sign flip on the rotor).
    pub symmetry_angle: f64,
    /// Whether the triangulation is invariant under `symmetry_angle` and mirroring.
    pub symmetric: bool,
}

/// Piecewise-linear-in-angle trace of one subdomain on the coupling circle.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceTrace {
    pub side: Side,
    pub radius: f64,
    /// Strictly increasing angles in `[0, 2 pi)`.
    pub angles: Vec<f64>,
    pub node_ids: Vec<usize>,
}

impl InterfaceTrace {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// The same trace seen from a frame rotated by `alpha` (angles shifted and re-sorted).
    pub fn rotated(&self, alpha: f64) -> InterfaceTrace {
        let mut pairs: Vec<(f64, usize)> = self
            .angles
            .iter()
            .zip(&self.node_ids)
            .map(|(&t, &id)| (wrap_angle(t + alpha), id))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        InterfaceTrace {
            side: self.side,
            radius: self.radius,
            angles: pairs.iter().map(|p| p.0).collect(),
            node_ids: pairs.iter().map(|p| p.1).collect(),
        }
    }
}

/// Ring radii of one subdomain, innermost first.
pub fn radial_grid(cfg: &MachineConfig, side: Side) -> Vec<f64> {
    let (bands, divisions) = match side {
        Side::Rotor => (
            [cfg.r_rotor_in, cfg.r_magnet_in, cfg.r_rotor_out, cfg.r_gamma],
            cfg.angular_divisions_rotor,
        ),
        Side::Stator => (
            [cfg.r_gamma, cfg.r_stator_in, cfg.r_slot_out, cfg.r_stator_out],
            cfg.angular_divisions_stator,
        ),
    };
    let dtheta = 2.0 * PI / divisions as f64;
    let mut radii = vec![bands[0]];
    for w in bands.windows(2) {
        let (r0, r1) = (w[0], w[1]);
        let ratio = (r1 / r0).ln();
        let layers = cfg.radial_layers.max((ratio / dtheta - 1e-9).ceil() as usize);
        for i in 1..layers {
            radii.push(r0 * (ratio * i as f64 / layers as f64).exp());
        }
        radii.push(r1);
    }
    radii
}

/// Builds the rotor and stator meshes. They need not match across the coupling circle.
pub fn build_meshes(cfg: &MachineConfig) -> Result<(Mesh, Mesh)> {
    cfg.validate()?;
    let rotor = build_side(cfg, Side::Rotor)?;
    let stator = build_side(cfg, Side::Stator)?;
    Ok((rotor, stator))
}

fn build_side(cfg: &MachineConfig, side: Side) -> Result<Mesh> {
    let (divisions, period_count) = match side {
        Side::Rotor => (cfg.angular_divisions_rotor, 2 * cfg.pole_pairs),
        Side::Stator => (cfg.angular_divisions_stator, cfg.slots),
    };
    if divisions < 3 || divisions % period_count != 0 {
        return Err(Error::config(
            match side {
                Side::Rotor => "angular_divisions_rotor",
                Side::Stator => "angular_divisions_stator",
            },
            format!("{divisions} divisions are not divisible by the symmetry count {period_count}"),
        ));
    }
    let symmetric = (divisions / period_count) % 2 == 0;
    if !symmetric {
        log::warn!(
            "{side:?} mesh: {} sectors per symmetry period is odd; the triangulation will not be symmetry-exact",
            divisions / period_count
        );
    }
    let radii = radial_grid(cfg, side);
    let rings = radii.len();
    let mut nodes = Vec::with_capacity(rings * divisions);
    for &r in &radii {
        for k in 0..divisions {
            let theta = 2.0 * PI * k as f64 / divisions as f64;
            nodes.push([r * theta.cos(), r * theta.sin()]);
        }
    }
    let id = |ring: usize, k: usize| ring * divisions + k % divisions;
    let mut triangles = Vec::with_capacity(2 * (rings - 1) * divisions);
    for i in 0..rings - 1 {
        for k in 0..divisions {
            let (a, b, c, d) = (id(i, k), id(i, k + 1), id(i + 1, k + 1), id(i + 1, k));
            if k % 2 == 0 {
                triangles.push([a, d, c]);
                triangles.push([a, c, b]);
            } else {
                triangles.push([a, d, b]);
                triangles.push([b, d, c]);
            }
        }
    }
    let mut tags = Vec::with_capacity(triangles.len());
    for t in &triangles {
        let (tag, _) = cfg.region_at(centroid(&nodes, t))?;
        tags.push(tag);
    }
    let (dirichlet_ring, interface_ring) = match side {
        Side::Rotor => (0, rings - 1),
        Side::Stator => (rings - 1, 0),
    };
    Ok(Mesh {
        side,
        dirichlet_nodes: (0..divisions).map(|k| id(dirichlet_ring, k)).collect(),
        interface_nodes: (0..divisions).map(|k| id(interface_ring, k)).collect(),
        nodes,
        triangles,
        tags,
        symmetry_angle: 2.0 * PI / period_count as f64,
        symmetric,
    })
}

pub fn centroid(nodes: &[Point], t: &[usize; 3]) -> Point {
    let [a, b, c] = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let tri = self.triangles[t];
        [self.nodes[tri[0]], self.nodes[tri[1]], self.nodes[tri[2]]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.num_triangles() {
            let p = self.triangle_points(t);
            for i in 0..3 {
                let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                min = min.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        min
    }

    /// Rigidly rotated copy (node coordinates only).
    pub fn rotated(&self, alpha: f64) -> Mesh {
        let mut m = self.clone();
        for p in &mut m.nodes {
            *p = crate::machine_model::rotate_point(*p, alpha);
        }
        m
    }

    /// Legacy VTK ASCII dump with region tags and optional extra fields.
    pub fn to_vtk(&self, point_scalars: &[(&str, &[f64])], cell_scalars: &[(&str, &[f64])]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# vtk DataFile Version 3.0");
        let _ = writeln!(s, "{:?} mesh", self.side);
        let _ = writeln!(s, "ASCII");
        let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
        let _ = writeln!(s, "POINTS {} double", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:.17e} {:.17e} 0", p[0], p[1]);
        }
        let _ = writeln!(s, "CELLS {} {}", self.triangles.len(), 4 * self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.triangles.len());
        for _ in &self.triangles {
            let _ = writeln!(s, "5");
        }
        let _ = writeln!(s, "CELL_DATA {}", self.triangles.len());
        let _ = writeln!(s, "SCALARS region int 1\nLOOKUP_TABLE default");
        for tag in &self.tags {
            let _ = writeln!(s, "{}", tag.code());
        }
        for (name, values) in cell_scalars {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in values.iter() {
                let _ = writeln!(s, "{v:.17e}");
            }
        }
        if !point_scalars.is_empty() {
            let _ = writeln!(s, "POINT_DATA {}", self.nodes.len());
            for (name, values) in point_scalars {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for v in values.iter() {
                    let _ = writeln!(s, "{v:.17e}");
                }
            }
        }
        s
    }
}

/// Orders the coupling-circle nodes of a mesh by angle.
pub fn extract_trace(mesh: &Mesh) -> Result<InterfaceTrace> {
    if mesh.interface_nodes.len() < 3 {
        return Err(Error::Mesh(format!(
            "interface needs at least 3 nodes, found {}",
            mesh.interface_nodes.len()
        )));
    }
    let radius = {
        let p = mesh.nodes[mesh.interface_nodes[0]];
        p[0].hypot(p[1])
    };
    let mut pairs = Vec::with_capacity(mesh.interface_nodes.len());
    for &id in &mesh.interface_nodes {
        let p = mesh.nodes[id];
        let r = p[0].hypot(p[1]);
        if (r - radius).abs() > 1e-12 * radius {
            return Err(Error::Mesh(format!(
                "interface node {id} at radius {r:.15e} is off the circle of radius {radius:.15e}"
            )));
        }
        pairs.push((wrap_angle(p[1].atan2(p[0])), id));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in pairs.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::Mesh(format!(
                "interface nodes {} and {} share the angle {:.15e}",
                w[0].1, w[1].1, w[0].0
            )));
        }
    }
    Ok(InterfaceTrace {
        side: mesh.side,
        radius,
        angles: pairs.iter().map(|p| p.0).collect(),
        node_ids: pairs.iter().map(|p| p.1).collect(),
    })
}
