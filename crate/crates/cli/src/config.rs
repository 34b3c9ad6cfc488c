//! Run configuration: defaults per subcommand, a flat `key = value` file,
//! and command-line overrides, all funnelled through [`RunConfig::set`].

use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use transfold::trotter::Pauli;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Quench,
    Ground,
    Corr,
    Dscan,
    Oracle,
}

impl Command {
    pub const ALL: [Command; 5] = [Command::Quench, Command::Ground, Command::Corr, Command::Dscan, Command::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Command::Quench => "quench",
            Command::Ground => "ground",
            Command::Corr => "corr",
            Command::Dscan => "dscan",
            Command::Oracle => "oracle",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::Quench => "Magnetization after a quench from the x-polarized state",
            Command::Ground => "Imaginary-time ground state: energy and magnetization profile",
            Command::Corr => "Two-time correlator <O(t2) at 0, O(t1) at dx>",
            Command::Dscan => "Eigenvector error against bond dimension over time",
            Command::Oracle => "Free-fermion reference tables",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Folded,
    Transverse,
    Itebd,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Folded => "folded",
            Method::Transverse => "transverse",
            Method::Itebd => "itebd",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

/// Every configurable key with a one-line help text. Each is accepted both
/// in the config file and as `--key` on the command line.
pub const KEYS: &[(&str, &str)] = &[
    ("g", "transverse field"),
    ("h", "longitudinal field"),
    ("g0", "transverse field on the impurity site 0"),
    ("delta", "Trotter step (the fine step for ground)"),
    ("tmax", "final time; inverse temperature beta for ground"),
    ("bond", "maximal bond dimension"),
    ("tol", "power-iteration convergence tolerance"),
    ("method", "folded | transverse | itebd | oracle"),
    ("op", "observable: x | y | z"),
    ("t1", "earlier correlator time"),
    ("t2", "later correlator time"),
    ("dx", "correlator separation"),
    ("out", "output file (default stdout)"),
    ("format", "csv | jsonl"),
    ("seed", "seed for random starting vectors"),
    ("jobs", "concurrent sweep points"),
    ("stride", "Trotter steps between records"),
    ("coarse", "coarse imaginary-time step used before the last unit of beta"),
    ("xmax", "largest |x| in an impurity profile"),
    ("max_iters", "power-iteration limit"),
    ("bonds", "bond-dimension ladder for dscan, comma separated"),
    ("eps", "error targets for dscan, comma separated"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub g: f64,
    pub h: f64,
    pub g0: Option<f64>,
    pub delta: f64,
    pub tmax: f64,
    pub bond: usize,
    pub tol: f64,
    pub method: Method,
    pub op: Pauli,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub dx: i64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub jobs: usize,
    pub stride: usize,
    pub coarse: f64,
    pub xmax: i64,
    pub max_iters: usize,
    pub bonds: Vec<usize>,
    pub eps: Vec<f64>,
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Config(format!("{key} = {value:?}: {why}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| bad(key, value, "not a number"))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value.split(',').map(|v| num(key, v)).collect()
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let mut c = Self {
            command,
            g: 1.0,
            h: 0.0,
            g0: None,
            delta: 0.01,
            tmax: 1.0,
            bond: 64,
            tol: 1e-8,
            method: Method::Folded,
            op: Pauli::X,
            t1: None,
            t2: None,
            dx: 0,
            out: None,
            format: Format::Csv,
            seed: 0,
            jobs: 1,
            stride: 10,
            coarse: 0.1,
            xmax: 30,
            max_iters: 1000,
            bonds: vec![1, 2, 3, 4, 6, 8, 11, 16, 22, 32, 45, 64, 90, 128],
            eps: vec![1e-2, 1e-4, 1e-6],
        };
        match command {
            Command::Ground => {
                c.tmax = 10.0;
                c.bond = 32;
                c.method = Method::Transverse;
            }
            Command::Corr => c.delta = 0.05,
            Command::Dscan => {
                c.g = 1.05;
                c.h = 0.5;
                c.delta = 0.1;
                c.tmax = 4.0;
                c.stride = 5;
            }
            Command::Oracle => c.method = Method::Oracle,
            Command::Quench => {}
        }
        c
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "g" => self.g = num(key, v)?,
            "h" => self.h = num(key, v)?,
            "g0" => self.g0 = Some(num(key, v)?),
            "delta" => self.delta = num(key, v)?,
            "tmax" => self.tmax = num(key, v)?,
            "bond" => self.bond = num(key, v)?,
            "tol" => self.tol = num(key, v)?,
            "method" => {
                self.method = match v {
                    "folded" => Method::Folded,
                    "transverse" => Method::Transverse,
                    "itebd" => Method::Itebd,
                    "oracle" => Method::Oracle,
                    _ => return Err(bad(key, v, "expected folded, transverse, itebd or oracle")),
                }
            }
            "op" => {
                self.op = match v {
                    "x" => Pauli::X,
                    "y" => Pauli::Y,
                    "z" => Pauli::Z,
                    _ => return Err(bad(key, v, "expected x, y or z")),
                }
            }
            "t1" => self.t1 = Some(num(key, v)?),
            "t2" => self.t2 = Some(num(key, v)?),
            "dx" => self.dx = num(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "format" => {
                self.format = match v {
                    "csv" => Format::Csv,
                    "jsonl" => Format::Jsonl,
                    _ => return Err(bad(key, v, "expected csv or jsonl")),
                }
            }
            "seed" => self.seed = num(key, v)?,
            "jobs" => self.jobs = num(key, v)?,
            "stride" => self.stride = num(key, v)?,
            "coarse" => self.coarse = num(key, v)?,
            "xmax" => self.xmax = num(key, v)?,
            "max_iters" => self.max_iters = num(key, v)?,
            "bonds" => self.bonds = list(key, v)?,
            "eps" => self.eps = list(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` text. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected `key = value`", i + 1)));
            };
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |m: &str| Err(CliError::Config(m.into()));
        let finite = [self.g, self.h, self.delta, self.tmax, self.tol, self.coarse, self.g0.unwrap_or(0.0)];
        if finite.iter().any(|x| !x.is_finite()) {
            return err("numeric parameters must be finite");
        }
        if self.g < 0.0 || self.g0.is_some_and(|g0| g0 < 0.0) {
            return err("fields g and g0 must be non-negative");
        }
        if self.delta <= 0.0 || self.coarse <= 0.0 || self.tol <= 0.0 {
            return err("delta, coarse and tol must be positive");
        }
        if self.tmax < 0.0 {
            return err("tmax must be non-negative");
        }
        if self.bond == 0 || self.jobs == 0 || self.stride == 0 || self.max_iters == 0 {
            return err("bond, jobs, stride and max_iters must be positive");
        }
        if self.xmax < 0 {
            return err("xmax must be non-negative");
        }
        if (self.tmax / self.delta - (self.tmax / self.delta).round()).abs() > 1e-9 {
            return err("tmax must be a multiple of delta");
        }
        match self.command {
            Command::Corr => {
                let (Some(t1), Some(t2)) = (self.t1, self.t2) else {
                    return err("corr needs t1 and t2");
                };
                if !(0.0 <= t1 && t1 <= t2) || !t2.is_finite() {
                    return err("corr needs 0 <= t1 <= t2");
                }
                for t in [t1, t2] {
                    if (t / self.delta - (t / self.delta).round()).abs() > 1e-9 {
                        return err("t1 and t2 must be multiples of delta");
                    }
                }
                if self.method == Method::Itebd {
                    return err("corr supports folded, transverse and oracle");
                }
            }
            Command::Dscan => {
                if self.bonds.is_empty() || self.bonds.contains(&0) || self.bonds.windows(2).any(|w| w[0] >= w[1]) {
                    return err("bonds must be a strictly increasing list of positive integers");
                }
                if self.eps.is_empty() || self.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
                    return err("eps targets must lie in (0, 1)");
                }
            }
            Command::Ground => {
                if self.tmax <= 0.0 {
                    return err("ground needs beta = tmax > 0");
                }
            }
            Command::Quench | Command::Oracle => {}
        }
        if self.method == Method::Itebd && self.g0.is_some_and(|g0| g0 != self.g) {
            return err("itebd cannot treat an impurity");
        }
        Ok(())
    }

    /// Short digest of every setting that can influence the records. The
    /// output path and format are excluded.
    pub fn hash(&self) -> String {
        let canonical = self.to_string();
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Canonical `key = value` form, one key per line, in [`KEYS`] order.
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:?}"));
        let op = match self.op {
            Pauli::X => "x",
            Pauli::Y => "y",
            Pauli::Z => "z",
            Pauli::I => "i",
        };
        writeln!(f, "command = {}", self.command.name())?;
        writeln!(f, "g = {:?}", self.g)?;
        writeln!(f, "h = {:?}", self.h)?;
        writeln!(f, "g0 = {}", opt(self.g0))?;
        writeln!(f, "delta = {:?}", self.delta)?;
        writeln!(f, "tmax = {:?}", self.tmax)?;
        writeln!(f, "bond = {}", self.bond)?;
        writeln!(f, "tol = {:?}", self.tol)?;
        writeln!(f, "method = {}", self.method.name())?;
        writeln!(f, "op = {op}")?;
        writeln!(f, "t1 = {}", opt(self.t1))?;
        writeln!(f, "t2 = {}", opt(self.t2))?;
        writeln!(f, "dx = {}", self.dx)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "jobs = {}", self.jobs)?;
        writeln!(f, "stride = {}", self.stride)?;
        writeln!(f, "coarse = {:?}", self.coarse)?;
        writeln!(f, "xmax = {}", self.xmax)?;
        writeln!(f, "max_iters = {}", self.max_iters)?;
        writeln!(f, "bonds = {}", join(&self.bonds))?;
        writeln!(f, "eps = {}", join(&self.eps.iter().map(|e| format!("{e:?}")).collect::<Vec<_>>()))
    }
}
