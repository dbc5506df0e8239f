use crate::math::tanh;

/// Underestimation error of a candidate: the student ranks it worse than
/// the teacher does. `tanh(max(μ·(rank_student − rank_teacher), 0))`, in `[0, 1)`.
#[inline]
pub fn discrepancy_under(rank_student: usize, rank_teacher: usize, mu: f64) -> f64 {
    let gap = rank_student as f64 - rank_teacher as f64;
    tanh((mu * gap).max(0.0))
}

/// Overestimation error: the student ranks the candidate better than the teacher.
#[inline]
pub fn discrepancy_over(rank_student: usize, rank_teacher: usize, mu: f64) -> f64 {
    discrepancy_under(rank_teacher, rank_student, mu)
}
