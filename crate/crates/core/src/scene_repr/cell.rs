use super::{ProbMap, SceneMemory};
use crate::error::{Error, Result};
use crate::mapping::{ClassSet, SoftLabels};

/// Binary per-(grid, class) occupancy, overwritten on every visible grid.
///
/// Grids never seen report 0.5 so that the controller treats them like the
/// untouched rows of the embedding map.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMap {
    m: usize,
    n: usize,
    bits: Vec<ClassSet>,
    observed: Vec<bool>,
    touched: Vec<usize>,
}

impl CellMap {
    pub fn new(m: usize, n_classes: usize) -> Result<Self> {
        if n_classes > ClassSet::MAX_CLASSES {
            return Err(Error::Config(format!(
                "at most {} classes",
                ClassSet::MAX_CLASSES
            )));
        }
        Ok(CellMap {
            m,
            n: n_classes,
            bits: vec![ClassSet::default(); m * m],
            observed: vec![false; m * m],
            touched: Vec::new(),
        })
    }

    pub fn is_observed(&self, i: usize) -> bool {
        self.observed[i]
    }
}

impl SceneMemory for CellMap {
    fn m(&self) -> usize {
        self.m
    }

    fn n_classes(&self) -> usize {
        self.n
    }

    fn update(&mut self, labels: &SoftLabels) {
        for g in labels.visible() {
            let mut set = ClassSet::default();
            for (j, &y) in g.y.iter().enumerate() {
                if y >= 0.5 {
                    set.insert(j);
                }
            }
            self.bits[g.index] = set;
            if !self.observed[g.index] {
                self.observed[g.index] = true;
                self.touched.push(g.index);
            }
        }
    }

    fn prob(&self, i: usize, j: usize) -> f64 {
        if !self.observed[i] {
            0.5
        } else if self.bits[i].contains(j) {
            1.0
        } else {
            0.0
        }
    }

    fn query(&self, j: usize) -> Result<ProbMap> {
        if j >= self.n {
            return Err(Error::ClassOutOfRange(j));
        }
        Ok(ProbMap {
            m: self.m,
            p: (0..self.m * self.m).map(|i| self.prob(i, j)).collect(),
        })
    }

    fn touched(&self) -> &[usize] {
        &self.touched
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::LabeledGrid;

    fn labels(y: Vec<f64>) -> SoftLabels {
        SoftLabels {
            rho: 0,
            n_classes: y.len(),
            grids: vec![LabeledGrid {
                index: 2,
                c: 9,
                visible: true,
                y,
            }],
        }
    }

    #[test]
    fn last_write_wins() {
        let mut map = CellMap::new(3, 2).unwrap();
        assert_eq!(map.prob(2, 0), 0.5);
        map.update(&labels(vec![1.0, 0.0]));
        assert_eq!(map.prob(2, 0), 1.0);
        assert_eq!(map.prob(2, 1), 0.0);
        map.update(&labels(vec![0.0, 0.0]));
        assert_eq!(map.prob(2, 0), 0.0);
    }
}
