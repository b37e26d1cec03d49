//! Fluid-antenna port grid, block grouping, and label/coordinate maps.
//!
//! The antenna occupies a `λW₁ × λW₂` planar region with `N₁ × N₂` ports on a
//! uniform grid. Ports are partitioned into `G₁ × G₂` equal rectangular blocks
//! of `P₁ × P₂` ports each; groups and ports are labeled top-to-bottom then
//! left-to-right, and the global port index is `i = (g−1)P + p`. All labels in
//! the public API are 1-based, matching the usual system-model convention.

use crate::error::{Error, Result};

/// Physical port grid of the fluid antenna.
///
/// Axis 1 is vertical (extent `λW₁`, `N₁` ports, spacing `D₁`), axis 2 is
/// horizontal. An axis with a single port is degenerate: its spacing is 0 and
/// every port sits at coordinate 0 on that axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidAntennaGeometry {
    wavelength: f64,
    w1: f64,
    w2: f64,
    n1: usize,
    n2: usize,
    d1: f64,
    d2: f64,
}

impl FluidAntennaGeometry {
    /// Builds the grid and derives the spacings `D = λW/(N−1)` per axis.
    pub fn new(wavelength: f64, w1: f64, w2: f64, n1: usize, n2: usize) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::config(format!(
                "wavelength must be positive and finite, got {wavelength}"
            )));
        }
        if !(w1.is_finite() && w1 >= 0.0) || !(w2.is_finite() && w2 >= 0.0) {
            return Err(Error::config(format!(
                "aperture factors must be nonnegative and finite, got W1={w1}, W2={w2}"
            )));
        }
        if n1 == 0 || n2 == 0 {
            return Err(Error::config("port counts N1, N2 must be at least 1"));
        }
        let d1 = if n1 > 1 { wavelength * w1 / (n1 - 1) as f64 } else { 0.0 };
        let d2 = if n2 > 1 { wavelength * w2 / (n2 - 1) as f64 } else { 0.0 };
        Ok(Self { wavelength, w1, w2, n1, n2, d1, d2 })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn aperture_factors(&self) -> (f64, f64) {
        (self.w1, self.w2)
    }

    /// Ports per axis `(N₁, N₂)`.
    pub fn ports_per_axis(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    /// Adjacent-port spacings `(D₁, D₂)`; 0 on a degenerate axis.
    pub fn spacings(&self) -> (f64, f64) {
        (self.d1, self.d2)
    }

    /// Total port count `N = N₁·N₂`.
    pub fn num_ports(&self) -> usize {
        self.n1 * self.n2
    }
}

/// Block partition of the port grid into `G` groups of `P` ports, together
/// with the label maps and port coordinates induced by the grouping.
///
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct GroupingPlan {
    geometry: FluidAntennaGeometry,
    g1: usize,
    g2: usize,
    p1: usize,
    p2: usize,
    coords: Vec<(f64, f64)>,
}

impl GroupingPlan {
    /// Validates the tiling `N₁ = G₁P₁`, `N₂ = G₂P₂` and precomputes the
    /// coordinates of every port.
    pub fn new(geometry: FluidAntennaGeometry, g1: usize, g2: usize) -> Result<Self> {
        if g1 == 0 || g2 == 0 {
            return Err(Error::config("group counts G1, G2 must be at least 1"));
        }
        let (n1, n2) = geometry.ports_per_axis();
        if n1 % g1 != 0 {
            return Err(Error::config(format!(
                "G1={g1} does not tile N1={n1} into equal blocks"
            )));
        }
        if n2 % g2 != 0 {
            return Err(Error::config(format!(
                "G2={g2} does not tile N2={n2} into equal blocks"
            )));
        }
        let p1 = n1 / g1;
        let p2 = n2 / g2;
        let mut plan = Self { geometry, g1, g2, p1, p2, coords: Vec::new() };
        plan.coords = (1..=plan.num_ports())
            .map(|i| plan.compute_coordinates(i))
            .collect::<Result<_>>()?;
        Ok(plan)
    }

    pub fn geometry(&self) -> &FluidAntennaGeometry {
        &self.geometry
    }

    /// Groups per axis `(G₁, G₂)`.
    pub fn groups_per_axis(&self) -> (usize, usize) {
        (self.g1, self.g2)
    }

    /// Ports per group per axis `(P₁, P₂)`.
    pub fn group_shape(&self) -> (usize, usize) {
        (self.p1, self.p2)
    }

    /// Number of groups `G = G₁·G₂`.
    pub fn num_groups(&self) -> usize {
        self.g1 * self.g2
    }

    /// Ports per group `P = P₁·P₂`.
    pub fn ports_per_group(&self) -> usize {
        self.p1 * self.p2
    }

    /// Total port count `N`.
    pub fn num_ports(&self) -> usize {
        self.geometry.num_ports()
    }

    /// Group label `g = (b−1)G₁ + a` from row `a` and column `b`.
    pub fn group_label(&self, a: usize, b: usize) -> Result<usize> {
        if a < 1 || a > self.g1 || b < 1 || b > self.g2 {
            return Err(Error::config(format!(
                "group position ({a}, {b}) out of range 1..={} x 1..={}",
                self.g1, self.g2
            )));
        }
        Ok((b - 1) * self.g1 + a)
    }

    /// Inverse of [`group_label`](Self::group_label): `g -> (a, b)`.
    pub fn group_position(&self, g: usize) -> Result<(usize, usize)> {
        if g < 1 || g > self.num_groups() {
            return Err(Error::config(format!(
                "group label {g} out of range 1..={}",
                self.num_groups()
            )));
        }
        let a = (g - 1) % self.g1 + 1;
        let b = (g - 1) / self.g1 + 1;
        Ok((a, b))
    }

    /// In-group port label `p = (d−1)P₁ + c` from row `c` and column `d`.
    pub fn port_label(&self, c: usize, d: usize) -> Result<usize> {
        if c < 1 || c > self.p1 || d < 1 || d > self.p2 {
            return Err(Error::config(format!(
                "port position ({c}, {d}) out of range 1..={} x 1..={}",
                self.p1, self.p2
            )));
        }
        Ok((d - 1) * self.p1 + c)
    }

    /// Inverse of [`port_label`](Self::port_label): `p -> (c, d)`.
    pub fn port_position(&self, p: usize) -> Result<(usize, usize)> {
        if p < 1 || p > self.ports_per_group() {
            return Err(Error::config(format!(
                "port label {p} out of range 1..={}",
                self.ports_per_group()
            )));
        }
        let c = (p - 1) % self.p1 + 1;
        let d = (p - 1) / self.p1 + 1;
        Ok((c, d))
    }

    /// Global port index `i = (g−1)P + p`.
    pub fn global_index(&self, g: usize, p: usize) -> Result<usize> {
        if g < 1 || g > self.num_groups() {
            return Err(Error::config(format!(
                "group label {g} out of range 1..={}",
                self.num_groups()
            )));
        }
        if p < 1 || p > self.ports_per_group() {
            return Err(Error::config(format!(
                "port label {p} out of range 1..={}",
                self.ports_per_group()
            )));
        }
        Ok((g - 1) * self.ports_per_group() + p)
    }

    /// Inverse of [`global_index`](Self::global_index): `i -> (g, p)`.
    pub fn decompose(&self, i: usize) -> Result<(usize, usize)> {
        if i < 1 || i > self.num_ports() {
            return Err(Error::config(format!(
                "port index {i} out of range 1..={}",
                self.num_ports()
            )));
        }
        let p_total = self.ports_per_group();
        Ok(((i - 1) / p_total + 1, (i - 1) % p_total + 1))
    }

    /// Position `t_i = (((a−1)P₁+c−1)D₁, ((b−1)P₂+d−1)D₂)` of port `i`,
    /// with `(a, b, c, d)` recovered through the label maps. Port 1 sits at
    /// the reference point `(0, 0)`.
    pub fn port_coordinates(&self, i: usize) -> Result<(f64, f64)> {
        if i < 1 || i > self.num_ports() {
            return Err(Error::config(format!(
                "port index {i} out of range 1..={}",
                self.num_ports()
            )));
        }
        Ok(self.coords[i - 1])
    }

    /// Coordinates of every port, ordered by global index.
    pub fn coordinates(&self) -> &[(f64, f64)] {
        &self.coords
    }

    /// The index sets `𝕀_g` for `g = 1..G`; pairwise disjoint blocks whose
    /// union is `{1, …, N}`.
    pub fn index_sets(&self) -> Vec<Vec<usize>> {
        (1..=self.num_groups()).map(|g| self.group_ports(g).collect()).collect()
    }

    /// Iterator over `𝕀_g = {(g−1)P+1, …, gP}`.
    pub fn group_ports(&self, g: usize) -> impl Iterator<Item = usize> {
        let p_total = self.ports_per_group();
        (g - 1) * p_total + 1..=g * p_total
    }

    fn compute_coordinates(&self, i: usize) -> Result<(f64, f64)> {
        let (g, p) = self.decompose(i)?;
        let (a, b) = self.group_position(g)?;
        let (c, d) = self.port_position(p)?;
        let (d1, d2) = self.geometry.spacings();
        let x = ((a - 1) * self.p1 + c - 1) as f64 * d1;
        let y = ((b - 1) * self.p2 + d - 1) as f64 * d2;
        Ok((x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan_1d(n1: usize, g1: usize) -> GroupingPlan {
        let geom = FluidAntennaGeometry::new(1.0, 0.3, 0.0, n1, 1).unwrap();
        GroupingPlan::new(geom, g1, 1).unwrap()
    }

    #[test]
    fn spacing_follows_aperture() {
        let geom = FluidAntennaGeometry::new(1.0, 2.0, 4.0, 2, 4).unwrap();
        let (d1, d2) = geom.spacings();
        assert_eq!(d1, 2.0);
        assert_eq!(d2, 4.0 / 3.0);
        assert_eq!(geom.num_ports(), 8);
    }

    #[test]
    fn degenerate_axis_has_zero_spacing() {
        let geom = FluidAntennaGeometry::new(1.0, 0.5, 0.5, 4, 1).unwrap();
        assert_eq!(geom.spacings().1, 0.0);
        let plan = GroupingPlan::new(geom, 2, 1).unwrap();
        for &(_, y) in plan.coordinates() {
            assert_eq!(y, 0.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FluidAntennaGeometry::new(0.0, 1.0, 1.0, 2, 2).is_err());
        assert!(FluidAntennaGeometry::new(1.0, -1.0, 1.0, 2, 2).is_err());
        assert!(FluidAntennaGeometry::new(1.0, 1.0, 1.0, 0, 2).is_err());
        let geom = FluidAntennaGeometry::new(1.0, 1.0, 1.0, 4, 4).unwrap();
        // 3 does not divide 4 on either axis
        assert!(GroupingPlan::new(geom, 3, 1).is_err());
        assert!(GroupingPlan::new(geom, 1, 3).is_err());
        assert!(GroupingPlan::new(geom, 0, 1).is_err());
    }

    #[test]
    fn group_label_matches_row_column_map() {
        let geom = FluidAntennaGeometry::new(1.0, 1.0, 1.0, 4, 4).unwrap();
        let plan = GroupingPlan::new(geom, 2, 2).unwrap();
        assert_eq!(plan.group_label(1, 1).unwrap(), 1);
        assert_eq!(plan.group_label(2, 1).unwrap(), 2);
        assert_eq!(plan.group_label(1, 2).unwrap(), 3);
        assert_eq!(plan.group_label(2, 2).unwrap(), 4);
        assert!(plan.group_label(3, 1).is_err());
        assert!(plan.group_label(1, 0).is_err());
    }

    #[test]
    fn port_label_matches_row_column_map() {
        let geom = FluidAntennaGeometry::new(1.0, 1.0, 1.0, 4, 4).unwrap();
        let plan = GroupingPlan::new(geom, 2, 2).unwrap();
        assert_eq!(plan.port_label(1, 1).unwrap(), 1);
        assert_eq!(plan.port_label(2, 1).unwrap(), 2);
        assert_eq!(plan.port_label(2, 2).unwrap(), 4);
        assert!(plan.port_label(0, 1).is_err());
        assert!(plan.port_label(1, 3).is_err());
    }

    #[test]
    fn global_index_and_inverse() {
        let plan = plan_1d(4, 2);
        assert_eq!(plan.global_index(1, 1).unwrap(), 1);
        assert_eq!(plan.global_index(2, 1).unwrap(), 3);
        assert_eq!(plan.decompose(4).unwrap(), (2, 2));
        assert!(plan.global_index(3, 1).is_err());
        assert!(plan.decompose(0).is_err());
        assert!(plan.decompose(5).is_err());
    }

    #[test]
    fn label_maps_are_bijective() {
        for (n1, n2, g1, g2) in [(4, 4, 2, 2), (2, 4, 1, 2), (6, 1, 3, 1), (4, 2, 4, 1)] {
            let geom = FluidAntennaGeometry::new(1.0, 1.0, 1.0, n1, n2).unwrap();
            let plan = GroupingPlan::new(geom, g1, g2).unwrap();
            for a in 1..=g1 {
                for b in 1..=g2 {
                    let g = plan.group_label(a, b).unwrap();
                    assert_eq!(plan.group_position(g).unwrap(), (a, b));
                }
            }
            let (p1, p2) = plan.group_shape();
            for c in 1..=p1 {
                for d in 1..=p2 {
                    let p = plan.port_label(c, d).unwrap();
                    assert_eq!(plan.port_position(p).unwrap(), (c, d));
                }
            }
            for g in 1..=plan.num_groups() {
                for p in 1..=plan.ports_per_group() {
                    let i = plan.global_index(g, p).unwrap();
                    assert_eq!(plan.decompose(i).unwrap(), (g, p));
                }
            }
        }
    }

    #[test]
    fn coordinates_1d_layout() {
        // N1=4, N2=1, G1=2, P1=2 with D1 = 0.3·λ/3 = 0.1
        let plan = plan_1d(4, 2);
        let d1 = plan.geometry().spacings().0;
        assert_eq!(plan.port_coordinates(1).unwrap(), (0.0, 0.0));
        assert_eq!(plan.port_coordinates(2).unwrap(), (d1, 0.0));
        assert_eq!(plan.port_coordinates(3).unwrap(), (2.0 * d1, 0.0));
        assert_eq!(plan.port_coordinates(4).unwrap(), (3.0 * d1, 0.0));
    }

    #[test]
    fn index_sets_partition_1d() {
        let plan = plan_1d(4, 2);
        assert_eq!(plan.index_sets(), vec![vec![1, 2], vec![3, 4]]);
    }

    #[test]
    fn index_sets_partition_4x4() {
        let geom = FluidAntennaGeometry::new(1.0, 1.0, 1.0, 4, 4).unwrap();
        let plan = GroupingPlan::new(geom, 2, 2).unwrap();
        let sets = plan.index_sets();
        assert_eq!(sets[0], vec![1, 2, 3, 4]);
        // blocks of P=4 cover 1..=16 exactly once
        let mut seen = vec![false; 16];
        for set in &sets {
            assert_eq!(set.len(), 4);
            for &i in set {
                assert!(!seen[i - 1], "port {i} appears in two groups");
                seen[i - 1] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn single_group_takes_all_ports() {
        let geom = FluidAntennaGeometry::new(1.0, 1.0, 1.0, 2, 2).unwrap();
        let plan = GroupingPlan::new(geom, 1, 1).unwrap();
        assert_eq!(plan.index_sets(), vec![vec![1, 2, 3, 4]]);
    }

    #[test]
    fn adjacent_ports_in_group_are_one_spacing_apart() {
        // W = 1.5 over 4 ports gives the exactly representable spacing 0.5,
        // so the distances come out bit-exact.
        let geom = FluidAntennaGeometry::new(1.0, 1.5, 1.5, 4, 4).unwrap();
        let plan = GroupingPlan::new(geom, 2, 2).unwrap();
        let (d1, d2) = geom.spacings();
        for g in 1..=plan.num_groups() {
            let (p1, p2) = plan.group_shape();
            for c in 1..p1 {
                for d in 1..=p2 {
                    let i = plan.global_index(g, plan.port_label(c, d).unwrap()).unwrap();
                    let j = plan.global_index(g, plan.port_label(c + 1, d).unwrap()).unwrap();
                    let ti = plan.port_coordinates(i).unwrap();
                    let tj = plan.port_coordinates(j).unwrap();
                    let dist = ((ti.0 - tj.0).powi(2) + (ti.1 - tj.1).powi(2)).sqrt();
                    assert_eq!(dist, d1);
                }
            }
            for c in 1..=p1 {
                for d in 1..p2 {
                    let i = plan.global_index(g, plan.port_label(c, d).unwrap()).unwrap();
                    let j = plan.global_index(g, plan.port_label(c, d + 1).unwrap()).unwrap();
                    let ti = plan.port_coordinates(i).unwrap();
                    let tj = plan.port_coordinates(j).unwrap();
                    let dist = ((ti.0 - tj.0).powi(2) + (ti.1 - tj.1).powi(2)).sqrt();
                    assert_eq!(dist, d2);
                }
            }
        }
    }

    #[test]
    fn coordinates_2x4_fig5_config() {
        // W1=2, W2=4, N=2x4, G=1x2: groups are the left and right 2x2 blocks
        let geom = FluidAntennaGeometry::new(1.0, 2.0, 4.0, 2, 4).unwrap();
        let plan = GroupingPlan::new(geom, 1, 2).unwrap();
        assert_eq!(plan.num_groups(), 2);
        assert_eq!(plan.ports_per_group(), 4);
        assert_eq!(plan.port_coordinates(1).unwrap(), (0.0, 0.0));
        assert_eq!(plan.port_coordinates(2).unwrap(), (2.0, 0.0));
        assert_eq!(plan.port_coordinates(3).unwrap(), (0.0, 4.0 / 3.0));
        // group 2 starts two columns over
        assert_eq!(plan.port_coordinates(5).unwrap(), (0.0, 2.0 * 4.0 / 3.0));
    }
}
