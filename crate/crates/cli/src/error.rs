use std::fmt;

use hetnas::cimsim::CimSimError;
use hetnas::costmodel::CostError;
use hetnas::netir::NetirError;
use hetnas::scheduler::ScheduleError;
use hetnas::search::SearchError;

pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

/// A user-facing error carrying its process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INFEASIBLE,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<NetirError> for Failure {
    fn from(e: NetirError) -> Self {
        match e {
            NetirError::Parse(_) => Failure::parse(e.to_string()),
            _ => Failure::invalid(e.to_string()),
        }
    }
}

impl From<CostError> for Failure {
    fn from(e: CostError) -> Self {
        match e {
            CostError::Parse(_) | CostError::Units(_) => Failure::parse(e.to_string()),
            CostError::UnsupportedKind { .. } | CostError::CapacityExceeded { .. } => {
                Failure::infeasible(e.to_string())
            }
            _ => Failure::invalid(e.to_string()),
        }
    }
}

impl From<ScheduleError> for Failure {
    fn from(e: ScheduleError) -> Self {
        match e {
            ScheduleError::Cost(c) => c.into(),
            ScheduleError::InfeasibleCapacity => Failure::infeasible(e.to_string()),
            ScheduleError::TooLarge { .. } => Failure::invalid(e.to_string()),
        }
    }
}

impl From<SearchError> for Failure {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Netir(n) => n.into(),
            SearchError::Schedule(s) => s.into(),
            SearchError::Parse(_) => Failure::parse(e.to_string()),
            SearchError::EmptyFeasibleSet => Failure::infeasible(e.to_string()),
            _ => Failure::invalid(e.to_string()),
        }
    }
}

impl From<CimSimError> for Failure {
    fn from(e: CimSimError) -> Self {
        Failure::invalid(e.to_string())
    }
}
