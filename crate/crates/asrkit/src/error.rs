use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate utt_id \"{0}\"")]
    DuplicateUttId(String),

    #[error("invalid language id \"{0}\": must be non-empty lowercase ASCII")]
    InvalidLanguageId(String),

    #[error("unknown language \"{0}\"")]
    UnknownLanguage(String),

    #[error("empty vocabulary for language \"{0}\"")]
    EmptyVocab(String),

    #[error("empty reference")]
    EmptyReference,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("silent input: cannot normalize loudness of an all-zero buffer")]
    SilentInput,

    #[error("unsupported wav format: {0}")]
    UnsupportedWav(String),

    #[error("wrong sample rate: expected {expected} Hz, got {got} Hz")]
    WrongSampleRate { expected: u32, got: u32 },

    #[error("invalid augmentation spec: {0}")]
    InvalidAugmentSpec(String),

    #[error("missing audio for utterance \"{0}\"")]
    MissingAudio(String),

    #[error("replay decoder has no hypothesis for utt_id \"{0}\"")]
    ReplayMiss(String),

    #[error("no decoder for language \"{0}\"")]
    MissingDecoder(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
