use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;

const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";
const VOCAB_MAGIC: &str = "# rltm-vocab v1";

/// Token to id mapping. Ids 0 and 1 are reserved for PAD and UNK, real tokens
/// occupy `[2, len)` in descending corpus frequency with lexicographic ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, TokenId>,
    id_to_token: Vec<String>,
    counts: Vec<u64>,
}

/// Accumulates token frequencies before truncation.
#[derive(Debug, Default, Clone)]
pub struct VocabBuilder {
    counts: HashMap<String, u64>,
}

impl VocabBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_tokens<I, T>(&mut self, tokens: I)
    where
        I: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        for t in tokens {
            *self.counts.entry(t.as_ref().to_owned()).or_insert(0) += 1;
        }
    }

    pub fn finish(self, max_size: usize) -> Result<Vocabulary> {
        if max_size < 3 {
            return Err(Error::InvalidConfig(format!(
                "vocabulary max_size must be >= 3, got {max_size}"
            )));
        }
        let mut ranked: Vec<(String, u64)> = self.counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - 2);

        let mut id_to_token = vec![PAD_TOKEN.to_owned(), UNK_TOKEN.to_owned()];
        let mut counts = vec![0, 0];
        for (tok, c) in ranked {
            id_to_token.push(tok);
            counts.push(c);
        }
        Ok(Vocabulary::from_parts(id_to_token, counts))
    }
}

/// Builds a vocabulary from token streams, keeping the `max_size - 2` most
/// frequent tokens.
pub fn build_vocab<I, S, T>(streams: I, max_size: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: IntoIterator<Item = T>,
    T: AsRef<str>,
{
    let mut builder = VocabBuilder::new();
    for stream in streams {
        builder.add_tokens(stream);
    }
    builder.finish(max_size)
}

impl Vocabulary {
    fn from_parts(id_to_token: Vec<String>, counts: Vec<u64>) -> Self {
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Self {
            token_to_id,
            id_to_token,
            counts,
        }
    }

    /// Number of ids including the two reserved ones.
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.len() <= 2
    }

    pub fn id(&self, token: &str) -> TokenId {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: TokenId) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    pub fn encode<T: AsRef<str>>(&self, tokens: &[T]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<&str> {
        ids.iter().map(|&i| self.token(i).unwrap_or(UNK_TOKEN)).collect()
    }

    /// Hex SHA-256 over the id-ordered token list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.id_to_token {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex_digest(h)
    }

    /// Writes the vocabulary as `id<TAB>token<TAB>count` lines after a header.
    /// `meta` pairs are written into the header verbatim.
    pub fn write_to<W: Write>(&self, mut w: W, meta: &[(&str, String)]) -> Result<()> {
        writeln!(w, "{VOCAB_MAGIC}")?;
        for (k, v) in meta {
            writeln!(w, "# {k}={v}")?;
        }
        for (i, (tok, c)) in self.id_to_token.iter().zip(&self.counts).enumerate() {
            writeln!(w, "{i}\t{tok}\t{c}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, meta: &[(&str, String)]) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(f, meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(f, path)
    }

    pub fn read_from<R: BufRead>(r: R, path: &Path) -> Result<Self> {
        let mut id_to_token = Vec::new();
        let mut counts = Vec::new();
        let mut saw_magic = false;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let n = lineno + 1;
            if line.starts_with('#') {
                if n == 1 && line.trim() == VOCAB_MAGIC {
                    saw_magic = true;
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(path, n, "expected `id<TAB>token<TAB>count`"));
            }
            let id: usize = cols[0]
                .parse()
                .map_err(|_| Error::parse(path, n, format!("bad id `{}`", cols[0])))?;
            if id != id_to_token.len() {
                return Err(Error::parse(path, n, format!("ids must be sequential, got {id}")));
            }
            let c: u64 = cols[2]
                .parse()
                .map_err(|_| Error::parse(path, n, format!("bad count `{}`", cols[2])))?;
            let expected = match id {
                0 => Some(PAD_TOKEN),
                1 => Some(UNK_TOKEN),
                _ => None,
            };
            if let Some(e) = expected {
                if cols[1] != e {
                    return Err(Error::parse(path, n, format!("id {id} must be `{e}`")));
                }
            }
            id_to_token.push(cols[1].to_owned());
            counts.push(c);
        }
        if !saw_magic {
            return Err(Error::parse(path, 1, "missing vocabulary header"));
        }
        if id_to_token.len() < 2 {
            return Err(Error::parse(path, 1, "vocabulary lacks reserved ids"));
        }
        let vocab = Self::from_parts(id_to_token, counts);
        if vocab.token_to_id.len() != vocab.len() - 2 {
            return Err(Error::Data(format!("{}: duplicate tokens", path.display())));
        }
        Ok(vocab)
    }
}

pub(crate) fn hex_digest(h: Sha256) -> String {
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
