//! Butcher tableaux.

#[derive(Clone, Debug, PartialEq)]
pub struct Tableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Tableau {
    fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Self {
        let c = a.iter().map(|row| row.iter().sum()).collect();
        Self { a, b, c }
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// `a_ij = 0` for `j ≥ i`.
    pub fn is_explicit(&self) -> bool {
        self.a
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().skip(i).all(|&v| v == 0.0))
    }

    /// `max |b_i a_ij + b_j a_ji − b_i b_j|`.
    pub fn symplectic_defect(&self) -> f64 {
        let s = self.stages();
        let mut worst = 0.0f64;
        for i in 0..s {
            for j in 0..s {
                let d = self.b[i] * self.a[i][j] + self.b[j] * self.a[j][i] - self.b[i] * self.b[j];
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    pub fn midpoint() -> Self {
        Self::new(vec![vec![0.5]], vec![1.0])
    }

    pub fn gauss4() -> Self {
        let r = 3f64.sqrt() / 6.0;
        Self::new(vec![vec![0.25, 0.25 - r], vec![0.25 + r, 0.25]], vec![0.5, 0.5])
    }

    pub fn gauss6() -> Self {
        let q = 15f64.sqrt();
        Self::new(
            vec![
                vec![5.0 / 36.0, 2.0 / 9.0 - q / 15.0, 5.0 / 36.0 - q / 30.0],
                vec![5.0 / 36.0 + q / 24.0, 2.0 / 9.0, 5.0 / 36.0 - q / 24.0],
                vec![5.0 / 36.0 + q / 30.0, 2.0 / 9.0 + q / 15.0, 5.0 / 36.0],
            ],
            vec![5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0],
        )
    }

    pub fn rk4() -> Self {
        Self::new(
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        )
    }
}
