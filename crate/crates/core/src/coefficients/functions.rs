//! Scalar building blocks: pointwise nonlinearities, moduli of continuity and
//! the neutral-term kernel `b(x, z, y)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// `e^-2`, the junction point of the built-in non-Lipschitz nonlinearity and modulus.
pub fn junction() -> f64 {
    (-2.0f64).exp()
}

/// Scalar function applied pointwise to a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFn {
    Zero,
    Identity,
    Constant(f64),
    /// `x -> slope * x`
    Linear(f64),
    /// `tanh`, bounded with Lipschitz constant 1.
    Tanh,
    Square,
    /// `|x| (p |ln|x||)^(1/p)` for `0 < |x| <= e^-2`, continued by the
    /// constant `e^-2 (2p)^(1/p)` for `|x| > e^-2`.
    PaperF { p: f64 },
}

impl ScalarFn {
    /// Parses a config name. `p` feeds `builtin:paper_f`.
    pub fn parse(name: &str, p: f64) -> Result<Self> {
        let name = name.trim();
        let name = name.strip_prefix("builtin:").unwrap_or(name);
        let parsed = match name {
            "zero" => ScalarFn::Zero,
            "identity" => ScalarFn::Identity,
            "bounded_tanh" | "tanh" => ScalarFn::Tanh,
            "square" => ScalarFn::Square,
            "paper_f" => ScalarFn::PaperF { p },
            other => {
                if let Some(arg) = parse_call(other, "constant")? {
                    ScalarFn::Constant(arg)
                } else if let Some(arg) = parse_call(other, "linear")? {
                    ScalarFn::Linear(arg)
                } else {
                    return Err(Error::Config(format!("unknown scalar function `{other}`")));
                }
            }
        };
        Ok(parsed)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Identity => x,
            ScalarFn::Constant(c) => c,
            ScalarFn::Linear(s) => s * x,
            ScalarFn::Tanh => x.tanh(),
            ScalarFn::Square => x * x,
            ScalarFn::PaperF { p } => paper_f(x, p),
        }
    }

    /// `Some(c)` when the function ignores its argument.
    pub fn as_constant(&self) -> Option<f64> {
        match *self {
            ScalarFn::Zero => Some(0.0),
            ScalarFn::Constant(c) => Some(c),
            ScalarFn::Linear(s) if s == 0.0 => Some(0.0),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    /// Upper bound on `|f|` when the function is bounded.
    pub fn sup_abs(&self) -> Option<f64> {
        match *self {
            ScalarFn::Zero => Some(0.0),
            ScalarFn::Constant(c) => Some(c.abs()),
            ScalarFn::Tanh => Some(1.0),
            ScalarFn::PaperF { p } => Some(paper_f(junction(), p)),
            ScalarFn::Linear(s) if s == 0.0 => Some(0.0),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ScalarFn::Zero => "zero".into(),
            ScalarFn::Identity => "identity".into(),
            ScalarFn::Constant(c) => format!("constant({c})"),
            ScalarFn::Linear(s) => format!("linear({s})"),
            ScalarFn::Tanh => "bounded_tanh".into(),
            ScalarFn::Square => "square".into(),
            ScalarFn::PaperF { .. } => "builtin:paper_f".into(),
        }
    }
}

fn parse_call(text: &str, head: &str) -> Result<Option<f64>> {
    let Some(rest) = text.strip_prefix(head) else {
        return Ok(None);
    };
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::Config(format!("malformed `{text}`, expected {head}(<number>)")))?;
    inner
        .trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Config(format!("bad numeric argument in `{text}`")))
}

fn paper_f(x: f64, p: f64) -> f64 {
    let ax = x.abs();
    let e2 = junction();
    if ax == 0.0 {
        0.0
    } else if ax <= e2 {
        ax * (p * -ax.ln()).powf(1.0 / p)
    } else {
        e2 * (2.0 * p).powf(1.0 / p)
    }
}

/// Modulus of continuity `N` on `[0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Modulus {
    /// `-s ln s` on `(0, e^-2]`, `s + e^-2` beyond.
    PaperN,
    /// `N(s) = s`.
    Linear,
    /// `N(s) = s^2`; not concave.
    Quadratic,
    /// `N(s) = sqrt(s)`; concave, but `int_0 ds / N(s)` is finite.
    SquareRoot,
}

impl Modulus {
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        match name.strip_prefix("builtin:").unwrap_or(name) {
            "paper_N" | "paper_n" => Ok(Modulus::PaperN),
            "linear" => Ok(Modulus::Linear),
            "quadratic" => Ok(Modulus::Quadratic),
            "sqrt" => Ok(Modulus::SquareRoot),
            other => Err(Error::Config(format!("unknown modulus `{other}`"))),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Modulus::PaperN => {
                let e2 = junction();
                if s <= 0.0 {
                    0.0
                } else if s <= e2 {
                    -s * s.ln()
                } else {
                    s + e2
                }
            }
            Modulus::Linear => s,
            Modulus::Quadratic => s * s,
            Modulus::SquareRoot => s.max(0.0).sqrt(),
        }
    }

    /// Points where the formula changes branch.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Modulus::PaperN => vec![junction()],
            _ => Vec::new(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Modulus::PaperN => "builtin:paper_N".into(),
            Modulus::Linear => "linear".into(),
            Modulus::Quadratic => "quadratic".into(),
            Modulus::SquareRoot => "sqrt".into(),
        }
    }
}

/// General kernel closure `b(x, z, y)`.
pub type KernelFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Kernel of the neutral term `g(phi)(x) = int_D b(x, phi(theta_g, y), y) dy`.
#[derive(Clone)]
pub enum Kernel {
    Zero,
    /// `b(x, z, y) = c sin(pi x) k(z)`.
    Separable { c: f64, z: ScalarFn },
    General(KernelFn),
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Zero => write!(f, "Kernel::Zero"),
            Kernel::Separable { c, z } => write!(f, "Kernel::Separable {{ c: {c}, z: {z:?} }}"),
            Kernel::General(_) => write!(f, "Kernel::General(..)"),
        }
    }
}

impl Kernel {
    /// `zero`, `builtin:separable(c)` (tanh in z) or `linear(c)` (identity in z).
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        let bare = name.strip_prefix("builtin:").unwrap_or(name);
        if bare == "zero" {
            return Ok(Kernel::Zero);
        }
        if let Some(c) = parse_call(bare, "separable")? {
            return Ok(Kernel::Separable { c, z: ScalarFn::Tanh });
        }
        if let Some(c) = parse_call(bare, "linear")? {
            return Ok(Kernel::Separable { c, z: ScalarFn::Identity });
        }
        Err(Error::Config(format!("unknown kernel `{name}`")))
    }

    pub fn eval(&self, x: f64, z: f64, y: f64) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::Separable { c, z: k } => c * (PI * x).sin() * k.eval(z),
            Kernel::General(b) => b(x, z, y),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Kernel::Zero => true,
            Kernel::Separable { c, z } => *c == 0.0 || z.is_zero(),
            Kernel::General(_) => false,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Kernel::Zero => "zero".into(),
            Kernel::Separable { c, z: ScalarFn::Tanh } => format!("builtin:separable({c})"),
            Kernel::Separable { c, z: ScalarFn::Identity } => format!("linear({c})"),
            Kernel::Separable { c, z } => format!("separable({c}, {})", z.name()),
            Kernel::General(_) => "general".into(),
        }
    }
}
