//! Catalog of the certifications a scenario can request.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemKind {
    Rough,
    Chemistry,
    Skt,
    Duality,
    Kernel,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 5] = [
        ProblemKind::Rough,
        ProblemKind::Chemistry,
        ProblemKind::Skt,
        ProblemKind::Duality,
        ProblemKind::Kernel,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::Rough => "rough",
            ProblemKind::Chemistry => "chemistry",
            ProblemKind::Skt => "skt",
            ProblemKind::Duality => "duality",
            ProblemKind::Kernel => "kernel",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown problem kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckInfo {
    pub name: &'static str,
    pub kinds: &'static [ProblemKind],
    pub summary: &'static str,
    pub pass_rule: &'static str,
}

use ProblemKind::*;

pub const CHECKS: &[CheckInfo] = &[
    CheckInfo {
        name: "monotonicity",
        kinds: &[Rough],
        summary: "Smallest time increment of the rough solution.",
        pass_rule: "min (w^{n+1} - w^n) >= -1e-8 * max(|w|, 1)",
    },
    CheckInfo {
        name: "sandwich",
        kinds: &[Rough],
        summary: "Comparison with the constant-clock solutions v_{a0} and v_{a0 c0}.",
        pass_rule: "v_{a0 c0} - tol <= w <= v_{a0} + tol everywhere; INCONCLUSIVE if w is not monotone",
    },
    CheckInfo {
        name: "decay",
        kinds: &[Rough],
        summary: "Oscillation over nested cylinders R 4^{-k}; fitted delta of o_{k+1} <= (1-delta) o_k + C 4^{-gamma k}.",
        pass_rule: "delta_fit >= 0.01 with at least 3 levels; INCONCLUSIVE otherwise or if w is not monotone",
    },
    CheckInfo {
        name: "holder",
        kinds: &[Rough],
        summary: "Fitted Hölder exponent and seminorm normalised by |f|_{L^p L^q} + |w_init|_{C^1}, on h and h/2.",
        pass_rule: "alpha > 0 on both grids and normalised seminorms within a factor 2",
    },
    CheckInfo {
        name: "boundary_decay",
        kinds: &[Rough],
        summary: "Q = sup w / (d_x^{gamma_tilde} (|w_init|_Lip + |f|)) on h and h/2.",
        pass_rule: "Q finite on both grids and within a factor 2",
    },
    CheckInfo {
        name: "short_time",
        kinds: &[Rough],
        summary: "Q = sup |w(t) - w(0)| / (t^{min(1,gamma)/2} (|w_init|_{C^1} + |f|)) on h and h/2.",
        pass_rule: "Q finite on both grids and within a factor 2",
    },
    CheckInfo {
        name: "positivity",
        kinds: &[Chemistry, Skt],
        summary: "Smallest density over the run.",
        pass_rule: "min >= -1e-10",
    },
    CheckInfo {
        name: "conservation",
        kinds: &[Chemistry],
        summary: "Per-step increments of int(u1+u2), int(u3+u4), int(u1+u4).",
        pass_rule: "every increment <= 1e-10",
    },
    CheckInfo {
        name: "chemistry_a_bounds",
        kinds: &[Chemistry],
        summary: "a = sum u_i / sum d_i u_i against 1/max d_i and 1/min d_i.",
        pass_rule: "1/max d_i <= a <= 1/min d_i at every node",
    },
    CheckInfo {
        name: "chemistry_aux_residual",
        kinds: &[Chemistry],
        summary: "Residual of a dw/dt - Lw = sum u_i^init with w = int sum d_i u_i.",
        pass_rule: "sup |residual| <= aux.tol",
    },
    CheckInfo {
        name: "aux_monotonicity",
        kinds: &[Chemistry, Skt],
        summary: "Time monotonicity of the auxiliary potential w.",
        pass_rule: "min (w^{n+1} - w^n) >= -1e-8 * max(|w|, 1)",
    },
    CheckInfo {
        name: "aux_holder",
        kinds: &[Chemistry, Skt],
        summary: "Hölder fit of the auxiliary potential w on h and h/2.",
        pass_rule: "alpha > 0 on both grids and seminorms within a factor 2",
    },
    CheckInfo {
        name: "energy_inequality",
        kinds: &[Chemistry, Skt],
        summary: "Smallest C_p in the L^{p+1} energy inequality, on h and h/2.",
        pass_rule: "C_p finite on both grids and within a factor 2",
    },
    CheckInfo {
        name: "interpolation",
        kinds: &[Chemistry, Skt],
        summary: "Smallest constant in the L^{2(3-a)/(2-a)} interpolation inequality with the fitted exponent, on h and h/2.",
        pass_rule: "constant finite on both grids and within a factor 2",
    },
    CheckInfo {
        name: "skt_v_bound",
        kinds: &[Skt],
        summary: "sup v against max(|v_init|_inf, r_v/d22).",
        pass_rule: "sup v <= max(|v_init|_inf, r_v/d22) + 1e-8",
    },
    CheckInfo {
        name: "skt_nu_bounds",
        kinds: &[Skt],
        summary: "nu = (mu u + m)/(u + m) against min(1, d1) and max(1, d1 + sigma |v|_inf).",
        pass_rule: "bounds hold within 1e-8 at every node",
    },
    CheckInfo {
        name: "skt_m_nonnegative",
        kinds: &[Skt],
        summary: "Smallest value of the auxiliary heat solution m.",
        pass_rule: "min m >= -1e-10",
    },
    CheckInfo {
        name: "skt_aux_residual",
        kinds: &[Skt],
        summary: "Residual of nu^{-1} dw/dt - Lw = u_init + r_u int u with w = int (mu u + m).",
        pass_rule: "sup |residual| <= aux.tol",
    },
    CheckInfo {
        name: "skt_sandwich",
        kinds: &[Skt],
        summary: "0 <= u <= u + m <= lap(w_tilde).",
        pass_rule: "largest violation <= aux.tol",
    },
    CheckInfo {
        name: "duality_feed",
        kinds: &[Skt],
        summary: "L^{2+delta} constant of u + m with mu = nu, on h and h/2.",
        pass_rule: "constant finite on both grids and within a factor 2",
    },
    CheckInfo {
        name: "duality_contraction",
        kinds: &[Duality],
        summary: "Space-time L^2 ratio of Gamma * L[(mu - 1) u] to u over random rescaled mu draws.",
        pass_rule: "every ratio <= 1 - lambda + 1e-8",
    },
    CheckInfo {
        name: "modewise_contraction",
        kinds: &[Duality],
        summary: "Per-mode discrete convolution with lambda_k e^{lambda_k s} on random signals.",
        pass_rule: "every l^2 ratio <= 1 + 1e-10",
    },
    CheckInfo {
        name: "duality_bound",
        kinds: &[Duality],
        summary: "|u|_{L^{2+delta}} / (|u_init|_{L^{2+delta}} + |f|_{L^p L^q}) for each delta, on h and h/2.",
        pass_rule: "ratio finite on both grids and within a factor 2; INCONCLUSIVE if the exponent condition fails",
    },
    CheckInfo {
        name: "kernel_lower_bound",
        kinds: &[Kernel],
        summary: "R^d inf Gamma over B(0,R/4)^2 x [T_R/(2 c0 a0), T_R/a0] against the explicit constant.",
        pass_rule: "measured inf >= c_low",
    },
    CheckInfo {
        name: "kernel_comparator",
        kinds: &[Kernel],
        summary: "Gamma minus the Gaussian comparator on B(0,R/4)^2.",
        pass_rule: "min gap >= -1e-8",
    },
    CheckInfo {
        name: "kernel_moment",
        kinds: &[Kernel],
        summary: "sup int |x-y| Gamma dx / t^{1/2 - eps} on h and h/2.",
        pass_rule: "finite on both grids and within a factor 2",
    },
    CheckInfo {
        name: "kernel_boundary_gaussian",
        kinds: &[Kernel],
        summary: "Smallest C in Gamma <= C d_x d_y t^{-(d+2)/2} e^{-c|x-y|^2/t}, c in {1/8, 1/16}, on h and h/2.",
        pass_rule: "finite on both grids and within a factor 2",
    },
];

pub fn find(name: &str) -> Option<&'static CheckInfo> {
    CHECKS.iter().find(|c| c.name == name)
}

pub fn checks_for(kind: ProblemKind) -> Vec<&'static str> {
    CHECKS.iter().filter(|c| c.kinds.contains(&kind)).map(|c| c.name).collect()
}

pub fn describe(info: &CheckInfo) -> String {
    let kinds: Vec<&str> = info.kinds.iter().map(|k| k.as_str()).collect();
    format!(
        "{}\n  kinds: {}\n  {}\n  pass: {}\n",
        info.name,
        kinds.join(", "),
        info.summary,
        info.pass_rule
    )
}
