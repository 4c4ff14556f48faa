//! `missdig` — exact missing-digits sets, their natural measures, and
//! Diophantine approximation experiments around them.

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use missdig_cli::config::{parse_rat, FileConfig, SysSpec};
use missdig_cli::run::{self, BoxDimArgs, CountingArgs, NondivArgs};
use missdig_cli::par;

#[derive(Parser)]
#[command(name = "missdig", version, about = "missing-digits sets, exact measures, and counting experiments", long_about = None)]
struct Cli {
    /// JSON config file; command-line flags override its fields
    #[arg(long, global = true)]
    config: Option<String>,
    /// output directory for CSV/JSON/plot files
    #[arg(long, global = true)]
    out_dir: Option<String>,
    /// seed for every sampled computation
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// override for the exact-measure recursion depth
    #[arg(long, global = true)]
    max_depth: Option<u32>,
    /// tolerance for truncated transforms
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct SysArgs {
    /// base b of the digit system
    #[arg(long)]
    base: Option<u32>,
    /// digits kept in the first coordinate, e.g. 0123
    #[arg(long)]
    digits: Option<String>,
    /// digits kept in the second coordinate (product systems)
    #[arg(long)]
    digits2: Option<String>,
}

impl SysArgs {
    fn spec(&self, file: &FileConfig) -> Result<SysSpec> {
        if let Some(base) = self.base {
            let mut ds = Vec::new();
            ds.push(self.digits.clone().unwrap_or_else(|| {
                (0..base).map(|d| char::from_digit(d, 36).unwrap()).collect()
            }));
            if let Some(d2) = &self.digits2 {
                ds.push(d2.clone());
            }
            return SysSpec::from_flags(base, &ds);
        }
        if let Some(s) = &file.sys {
            return Ok(s.clone());
        }
        bail!("no digit system: pass --base/--digits or a config file");
    }
}

#[derive(Args, Clone)]
struct QRange {
    /// explicit list of Q values
    #[arg(long, value_delimiter = ',')]
    q: Vec<u64>,
    /// dyadic range: use Q = 2^m for m in [q-exp-lo, q-exp-hi]
    #[arg(long)]
    q_exp_lo: Option<u32>,
    #[arg(long)]
    q_exp_hi: Option<u32>,
}

impl QRange {
    fn list(&self) -> Result<Vec<u64>> {
        if !self.q.is_empty() {
            return Ok(self.q.clone());
        }
        match (self.q_exp_lo, self.q_exp_hi) {
            (Some(lo), Some(hi)) if lo <= hi => Ok(run::pow2_list(lo, hi)),
            _ => bail!("pass --q values or --q-exp-lo/--q-exp-hi"),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a named dimension formula from key=value pairs
    Formulas {
        /// formula name (upper-dim, lower-dim-general, lower-dim-special,
        /// min-attained, bd-conjecture, kappa-requirement, admissible-region)
        name: String,
        /// key=value arguments, e.g. d=1 delta=0.8614 tau=1.2
        args: Vec<String>,
    },
    /// Local counting audit over a (Q, tau) grid with cylinder balls
    AuditCounting {
        #[command(flatten)]
        sys: SysArgs,
        #[command(flatten)]
        q: QRange,
        /// tau exponents (eta = Q^-tau), comma separated
        #[arg(long, value_delimiter = ',')]
        tau: Vec<f64>,
        /// shift as an exact rational "num/den"
        #[arg(long, default_value = "0")]
        theta: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
    },
    /// Global counting audit mu(A_Q)/(Q eta^d)
    AuditGlobal {
        #[command(flatten)]
        sys: SysArgs,
        #[arg(long)]
        q: u64,
        /// eta as exact rational; alternatively --tau
        #[arg(long)]
        eta: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value = "0")]
        theta: String,
    },
    /// Covering count of depth-ceil(log_b(Q/eta)) cylinders meeting A_Q
    AuditCover {
        #[command(flatten)]
        sys: SysArgs,
        #[arg(long)]
        q: u64,
        #[arg(long)]
        eta: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value = "0")]
        theta: String,
        #[arg(long)]
        depth: Option<u32>,
    },
    /// Non-divergence sums for product systems (d = 2)
    AuditNondiv {
        #[command(flatten)]
        sys: SysArgs,
        #[command(flatten)]
        q: QRange,
        #[arg(long)]
        tau: f64,
        /// branch word per coordinate, e.g. --word 01 --word2 23
        #[arg(long, default_value = "")]
        word: String,
        #[arg(long, default_value = "")]
        word2: String,
    },
    /// Local ubiquity for rectangles (d = 2)
    AuditUbiquity {
        #[command(flatten)]
        sys: SysArgs,
        #[command(flatten)]
        q: QRange,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value = "")]
        word: String,
        #[arg(long, default_value = "")]
        word2: String,
    },
    /// Fourier l1 partial sums and the decay-exponent estimate
    FourierDim {
        #[command(flatten)]
        sys: SysArgs,
        /// checkpoints M = b^k for k in [m-exp-lo, m-exp-hi]
        #[arg(long)]
        m_exp_lo: u32,
        #[arg(long)]
        m_exp_hi: u32,
    },
    /// Rational points in small boxes lie on one hyperplane
    SimplexCheck {
        #[arg(long, default_value_t = 2)]
        d: u32,
        #[arg(long, default_value_t = 20)]
        q_max: u64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// run oversized boxes anyway and report violations
        #[arg(long)]
        demonstrate: bool,
    },
    /// Absolutely-decaying behavior around hyperplane neighborhoods
    DecayCheck {
        #[command(flatten)]
        sys: SysArgs,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
    },
    /// Greedy disjoint rectangle selection with enlargement coverage
    CoverCheck {
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// exponent profile parameter as exact rational
        #[arg(long, default_value = "3/5")]
        tau: String,
    },
    /// Box-counting slope of K intersected with a finite stage
    BoxDim {
        #[command(flatten)]
        sys: SysArgs,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value = "0")]
        theta: String,
        #[arg(long)]
        q0: u64,
        #[arg(long)]
        q1: u64,
        #[arg(long)]
        depth_lo: Option<u32>,
        #[arg(long)]
        depth_hi: Option<u32>,
    },
    /// Hoelder audit of the restricted measure on B cap A_Q
    NuAudit {
        #[command(flatten)]
        sys: SysArgs,
        #[command(flatten)]
        q: QRange,
        #[arg(long)]
        tau: f64,
        /// ball word (digit string)
        #[arg(long, default_value = "")]
        ball: String,
        #[arg(long, default_value = "1")]
        c: String,
        /// Hoelder exponent s
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 0.3)]
        beta: f64,
        #[arg(long, default_value_t = 10000)]
        samples: u64,
    },
    /// Full product-form construction (d = 2): selection, coverage, counts
    ProductAudit {
        #[command(flatten)]
        sys: SysArgs,
        #[command(flatten)]
        q: QRange,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value = "")]
        word: String,
        #[arg(long, default_value = "")]
        word2: String,
        #[arg(long, default_value_t = 128)]
        samples: u64,
    },
    /// Re-check the config hashes embedded in an output directory
    VerifyOutputs {},
}

fn main() {
    par::init_threads();
    let cli = Cli::parse();
    let code = match dispatch(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            run::EXIT_CONFIG
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| file.out_dir.clone())
        .unwrap_or_else(|| "out".to_string());
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let max_depth = cli.max_depth.or(file.max_depth);
    let tol = cli.tol.or(file.tol).unwrap_or(1e-12);

    match &cli.command {
        Cmd::Formulas { name, args } => run::formulas_cmd(&out_dir, name, args),
        Cmd::AuditCounting { sys, q, tau, theta, alpha, beta } => {
            let a = CountingArgs {
                sys: sys.spec(&file)?,
                q_list: q.list()?,
                taus: tau.clone(),
                theta: parse_rat(theta)?,
                alpha: *alpha,
                beta: *beta,
                max_depth,
            };
            run::audit_counting_cmd(&out_dir, &a)
        }
        Cmd::AuditGlobal { sys, q, eta, tau, theta } => {
            let e = eta_value(*q, eta, tau)?;
            run::audit_global_cmd(&out_dir, &sys.spec(&file)?, *q, e, parse_rat(theta)?, max_depth)
        }
        Cmd::AuditCover { sys, q, eta, tau, theta, depth } => {
            let e = eta_value(*q, eta, tau)?;
            run::audit_cover_cmd(&out_dir, &sys.spec(&file)?, *q, e, parse_rat(theta)?, *depth)
        }
        Cmd::AuditNondiv { sys, q, tau, word, word2 } => {
            let a = NondivArgs {
                sys: sys.spec(&file)?,
                word: vec![word.clone(), word2.clone()],
                q_list: q.list()?,
                tau: *tau,
            };
            run::audit_nondiv_cmd(&out_dir, &a)
        }
        Cmd::AuditUbiquity { sys, q, tau, word, word2 } => {
            let a = NondivArgs {
                sys: sys.spec(&file)?,
                word: vec![word.clone(), word2.clone()],
                q_list: q.list()?,
                tau: *tau,
            };
            run::audit_ubiquity_cmd(&out_dir, &a, seed)
        }
        Cmd::FourierDim { sys, m_exp_lo, m_exp_hi } => {
            run::fourier_dim_cmd(&out_dir, &sys.spec(&file)?, *m_exp_lo, *m_exp_hi, tol)
        }
        Cmd::SimplexCheck { d, q_max, trials, demonstrate } => {
            run::simplex_check_cmd(&out_dir, *d, *q_max, *trials, seed, *demonstrate)
        }
        Cmd::DecayCheck { sys, samples } => {
            run::decay_check_cmd(&out_dir, &sys.spec(&file)?, *samples, seed)
        }
        Cmd::CoverCheck { trials, tau } => {
            run::cover_check_cmd(&out_dir, *trials, seed, parse_rat(tau)?)
        }
        Cmd::BoxDim { sys, tau, theta, q0, q1, depth_lo, depth_hi } => {
            let window = match (depth_lo, depth_hi) {
                (Some(a), Some(b)) => Some((*a, *b)),
                _ => None,
            };
            let a = BoxDimArgs {
                sys: sys.spec(&file)?,
                tau: *tau,
                theta: parse_rat(theta)?,
                q0: *q0,
                q1: *q1,
                window,
            };
            run::box_dim_cmd(&out_dir, &a)
        }
        Cmd::NuAudit { sys, q, tau, ball, c, s, beta, samples } => run::nu_audit_cmd(
            &out_dir,
            &sys.spec(&file)?,
            &[ball.clone()],
            &q.list()?,
            *tau,
            parse_rat(c)?,
            *s,
            *beta,
            *samples,
            seed,
        ),
        Cmd::ProductAudit { sys, q, tau, word, word2, samples } => run::product_audit_cmd(
            &out_dir,
            &sys.spec(&file)?,
            &[word.clone(), word2.clone()],
            &q.list()?,
            *tau,
            *samples,
            seed,
        ),
        Cmd::VerifyOutputs {} => run::verify_outputs_cmd(&out_dir),
    }
}

fn eta_value(q: u64, eta: &Option<String>, tau: &Option<f64>) -> Result<missdig::rat::Rat> {
    match (eta, tau) {
        (Some(e), _) => parse_rat(e),
        (None, Some(t)) => Ok(missdig::audit::eta_for(q, *t)),
        (None, None) => bail!("pass --eta num/den or --tau"),
    }
}
