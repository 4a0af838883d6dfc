//! CLI failures and their one-line error records.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input not found: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("bad config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] spcv_core::Error),
}

impl CliError {
    /// Process exit status: 2 for missing inputs and usage errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingInput(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::MissingInput(_) => "missing-input",
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
            CliError::Core(e) => match e {
                spcv_core::Error::InvalidInput(_) => "invalid-input",
                spcv_core::Error::Parse { .. } => "parse",
                spcv_core::Error::BadMagic(_) => "bad-magic",
                spcv_core::Error::VersionMismatch { .. } => "version-mismatch",
                spcv_core::Error::Truncated { .. } => "truncated",
                spcv_core::Error::MissingMetadata(_) => "missing-metadata",
                spcv_core::Error::NonFinite { .. } => "non-finite",
                spcv_core::Error::Frame { .. } => "frame",
                spcv_core::Error::Io(_) => "io",
                _ => "internal",
            },
        }
    }

    fn path(&self) -> Option<&PathBuf> {
        match self {
            CliError::MissingInput(p) | CliError::Config { path: p, .. } | CliError::Io { path: p, .. } => Some(p),
            CliError::Core(spcv_core::Error::MissingMetadata(p)) => Some(p),
            _ => None,
        }
    }

    /// `error kind=<kind> [path="<path>"] message="<text>"` on one line.
    pub fn record(&self) -> String {
        let mut s = format!("error kind={}", self.kind());
        if let Some(p) = self.path() {
            s.push_str(&format!(" path={}", quote(&p.display().to_string())));
        }
        s.push_str(&format!(" message={}", quote(&self.to_string())));
        s
    }
}

fn quote(s: &str) -> String {
    let escaped: String = s
        .chars()
        .flat_map(|c| match c {
            '"' => vec!['\\', '"'],
            '\\' => vec!['\\', '\\'],
            '\n' => vec!['\\', 'n'],
            c => vec![c],
        })
        .collect();
    format!("\"{escaped}\"")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_input_record() {
        let e = CliError::MissingInput(PathBuf::from("a b/c.ply"));
        assert_eq!(e.exit_code(), 2);
        assert_eq!(
            e.record(),
            "error kind=missing-input path=\"a b/c.ply\" message=\"input not found: a b/c.ply\""
        );
    }

    #[test]
    fn records_are_single_line() {
        let e = CliError::Usage("two\nlines \"quoted\"".into());
        assert!(!e.record().contains('\n'));
        assert_eq!(e.exit_code(), 2);
    }
}
