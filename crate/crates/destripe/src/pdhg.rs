//! Generic primal-dual hybrid gradient loop with extrapolation of the dual
//! variable. Both variational solvers drive their iterations through it.

/// Resolved step sizes and loop controls for one solve.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LoopConfig {
    pub tau: f64,
    pub sigma: f64,
    pub omega: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub log_stride: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct LoopTrace {
    pub iterations: usize,
    pub objective_trace: Vec<(usize, f64)>,
    pub final_objective: f64,
}

/// Runs the iteration
///   x_{k+1} = prox_{tau G}(x_k - tau K^T pbar_k)
///   p_{k+1} = prox_{sigma F*}(p_k + sigma K x_{k+1})
///   pbar_{k+1} = p_{k+1} + omega (p_{k+1} - p_k)
/// from the given primal start and zero dual variables.
pub(crate) fn run_loop(
    mut primal: Vec<f64>,
    dual_len: usize,
    cfg: &LoopConfig,
    mut apply_k: impl FnMut(&[f64], &mut [f64]),
    mut apply_kt: impl FnMut(&[f64], &mut [f64]),
    mut prox_g: impl FnMut(&mut [f64], f64),
    mut prox_fstar: impl FnMut(&mut [f64], f64),
    mut objective: impl FnMut(&[f64]) -> f64,
) -> (Vec<f64>, LoopTrace) {
    let n = primal.len();
    let mut p = vec![0.0; dual_len];
    let mut pbar = vec![0.0; dual_len];
    let mut p_next = vec![0.0; dual_len];
    let mut kt_buf = vec![0.0; n];
    let mut prev_primal = if cfg.rel_tol > 0.0 {
        primal.clone()
    } else {
        Vec::new()
    };

    let mut trace = vec![(0, objective(&primal))];
    let mut iterations = 0;

    for k in 1..=cfg.max_iters {
        // primal step
        apply_kt(&pbar, &mut kt_buf);
        for (u, &g) in primal.iter_mut().zip(&kt_buf) {
            *u -= cfg.tau * g;
        }
        prox_g(&mut primal, cfg.tau);

        // dual step
        apply_k(&primal, &mut p_next);
        for (q, &pi) in p_next.iter_mut().zip(&p) {
            *q = pi + cfg.sigma * *q;
        }
        prox_fstar(&mut p_next, cfg.sigma);

        // extrapolation on the dual variable
        for i in 0..dual_len {
            pbar[i] = p_next[i] + cfg.omega * (p_next[i] - p[i]);
        }
        std::mem::swap(&mut p, &mut p_next);

        iterations = k;
        if cfg.log_stride > 0 && k % cfg.log_stride == 0 && k != cfg.max_iters {
            trace.push((k, objective(&primal)));
        }

        if cfg.rel_tol > 0.0 {
            let mut diff_sq = 0.0;
            let mut norm_sq = 0.0;
            for (new, old) in primal.iter().zip(&prev_primal) {
                diff_sq += (new - old) * (new - old);
                norm_sq += old * old;
            }
            if norm_sq > 0.0 && (diff_sq / norm_sq).sqrt() < cfg.rel_tol {
                break;
            }
            prev_primal.copy_from_slice(&primal);
        }
    }

    let final_objective = objective(&primal);
    trace.push((iterations, final_objective));
    (
        primal,
        LoopTrace {
            iterations,
            objective_trace: trace,
            final_objective,
        },
    )
}
