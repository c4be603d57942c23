use std::sync::Arc;

use super::{CarnotGroup, NormKind};
use crate::error::{usage, Result};

/// A group element in exponential coordinates, tied to its group.
#[derive(Debug, Clone)]
pub struct GroupPoint {
    group: Arc<CarnotGroup>,
    coords: Vec<f64>,
}

impl PartialEq for GroupPoint {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords && same_group(&self.group, &other.group)
    }
}

fn same_group(a: &Arc<CarnotGroup>, b: &Arc<CarnotGroup>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl GroupPoint {
    pub fn new(group: Arc<CarnotGroup>, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != group.dim() {
            return Err(usage(format!(
                "group {} has dimension {}, got {} coordinates",
                group.name(),
                group.dim(),
                coords.len()
            )));
        }
        Ok(Self { group, coords })
    }

    pub fn identity(group: Arc<CarnotGroup>) -> Self {
        let coords = group.identity();
        Self { group, coords }
    }

    pub fn group(&self) -> &Arc<CarnotGroup> {
        &self.group
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    fn check(&self, other: &GroupPoint) -> Result<()> {
        if same_group(&self.group, &other.group) {
            Ok(())
        } else {
            Err(usage(format!("points belong to different groups ({} vs {})", self.group.name(), other.group.name())))
        }
    }

    fn with(&self, coords: Vec<f64>) -> Self {
        Self { group: self.group.clone(), coords }
    }

    pub fn multiply(&self, other: &GroupPoint) -> Result<GroupPoint> {
        self.check(other)?;
        Ok(self.with(self.group.mul(&self.coords, &other.coords)))
    }

    /// `p^{-1} = -p` in exponential coordinates.
    pub fn inverse(&self) -> GroupPoint {
        self.with(self.coords.iter().map(|v| -v).collect())
    }

    pub fn dilate(&self, t: f64) -> Result<GroupPoint> {
        Ok(self.with(self.group.dilate(t, &self.coords)?))
    }

    pub fn hom_norm(&self) -> f64 {
        self.group.hom_norm(&self.coords)
    }

    pub fn smooth_norm(&self) -> f64 {
        self.group.smooth_norm(&self.coords)
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        self.group.norm(&self.coords, kind)
    }

    /// `‖y^{-1} x‖` with `x = self`.
    pub fn dist(&self, other: &GroupPoint, kind: NormKind) -> Result<f64> {
        self.check(other)?;
        Ok(self.group.dist(&self.coords, &other.coords, kind))
    }

    pub fn horizontal_projection(&self) -> GroupPoint {
        self.with(self.group.horizontal_projection(&self.coords))
    }

    /// `π̃(p)^{-1} p`.
    pub fn nonhorizontal_part(&self) -> GroupPoint {
        let mut out = vec![0.0; self.coords.len()];
        self.group.nonhorizontal_part_into(&self.coords, &mut out);
        self.with(out)
    }

    pub fn is_identity(&self) -> bool {
        self.coords.iter().all(|&v| v == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::builtin;
    use crate::Error;

    #[test]
    fn inverse_negates() {
        let g = builtin("heisenberg:1").unwrap();
        let p = GroupPoint::new(g.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.inverse().coords(), &[-1.0, -2.0, -3.0]);
        let e = GroupPoint::identity(g);
        assert!(e.inverse().coords().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mismatched_groups_are_rejected() {
        let a = GroupPoint::identity(builtin("heisenberg:1").unwrap());
        let b = GroupPoint::identity(builtin("abelian:3").unwrap());
        assert!(matches!(a.multiply(&b), Err(Error::Usage(_))));
        assert!(matches!(a.dist(&b, NormKind::Hom), Err(Error::Usage(_))));
    }

    #[test]
    fn wrong_coordinate_count_is_rejected() {
        assert!(matches!(
            GroupPoint::new(builtin("heisenberg:1").unwrap(), vec![1.0, 2.0]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn identity_is_neutral() {
        let g = builtin("engel").unwrap();
        let x = GroupPoint::new(g.clone(), vec![0.3, -1.0, 2.0, 0.5]).unwrap();
        let e = GroupPoint::identity(g);
        assert_eq!(x.multiply(&e).unwrap(), x);
        assert_eq!(e.multiply(&x).unwrap(), x);
    }
}
