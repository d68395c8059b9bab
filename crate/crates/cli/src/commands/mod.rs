pub mod approx_demo;
pub mod convex;
pub mod simulate;
pub mod soc_stats;
pub mod verify_svi;

/// Command failure with the exit code the process should end with:
/// 2 = malformed configuration or arguments, 3 = solver abort,
/// 4 = variational-inequality verdict failure.
#[derive(Debug)]
pub struct CmdError {
    pub exit_code: i32,
    pub message: String,
}

impl CmdError {
    pub fn config(msg: impl Into<String>) -> Self {
        CmdError {
            exit_code: 2,
            message: msg.into(),
        }
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        CmdError {
            exit_code: 3,
            message: msg.into(),
        }
    }

    pub fn verdict(msg: impl Into<String>) -> Self {
        CmdError {
            exit_code: 4,
            message: msg.into(),
        }
    }

    pub fn io(e: std::io::Error) -> Self {
        CmdError {
            exit_code: 3,
            message: format!("io error: {}", e),
        }
    }
}
