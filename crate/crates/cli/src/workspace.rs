//! Output directory layout, locking, provenance headers and the on-disk
//! cache of balanced corpora, vocabularies and trained spaces.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dialign::embedding::EmbeddingSpace;
use dialign::pipeline::{prepare, train_prepared, PipelineRun, Prepared};
use dialign::vocab::{VocabRole, Vocabulary};
use dialign::Corpus;
use serde::{Deserialize, Serialize};

use crate::config::{digest_hex, PipelineConfig};
use crate::error::{CliError, CliResult};

const LOCK_FILE: &str = ".dialign.lock";
const STAGE_FILE: &str = "stage.json";

pub const CORPORA: &str = "corpora";
pub const BALANCED: &str = "balanced";
pub const VOCAB: &str = "vocab";
pub const EMBEDDINGS: &str = "embeddings";
pub const MAPS: &str = "maps";
pub const REPORTS: &str = "reports";
pub const ENGAGEMENT: &str = "engagement";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_key: Option<String>,
}

impl Provenance {
    pub fn header_line(&self) -> String {
        format!(
            "{} {} | command={} | config={} | seed={}",
            self.tool, self.version, self.command, self.config_hash, self.seed
        )
    }
}

#[derive(Serialize, Deserialize)]
pub struct Wrapped<T> {
    pub provenance: Provenance,
    pub data: T,
}

/// Holds the output directory's lock file for its lifetime.
pub struct DirLock(PathBuf);

impl DirLock {
    pub fn acquire(dir: &Path) -> CliResult<Self> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked(format!(
                "{} is locked by another dialign process (remove {} if it is stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

pub struct Workspace {
    pub root: PathBuf,
    pub config: PipelineConfig,
    command: String,
    _lock: Option<DirLock>,
}

impl Workspace {
    /// Opens the output directory for writing, taking the lock.
    pub fn writer(config: PipelineConfig, command: &str) -> CliResult<Self> {
        let root = config.output_dir.clone();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        let lock = DirLock::acquire(&root)?;
        let ws = Workspace {
            root,
            config,
            command: command.to_string(),
            _lock: Some(lock),
        };
        ws.write_raw("config.json", &(ws.config.to_json() + "\n"))?;
        Ok(ws)
    }

    /// Opens the output directory without writing anything.
    pub fn reader(config: PipelineConfig, command: &str) -> Self {
        Workspace {
            root: config.output_dir.clone(),
            config,
            command: command.to_string(),
            _lock: None,
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn provenance(&self, stage_key: Option<String>) -> Provenance {
        Provenance {
            tool: "dialign".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.clone(),
            config_hash: self.config.hash(),
            seed: self.config.seed,
            stage_key,
        }
    }

    fn write_raw(&self, rel: &str, content: &str) -> CliResult<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// CSV with a `#` provenance line on top.
    pub fn write_csv(&self, rel: &str, body: &str) -> CliResult<PathBuf> {
        self.write_raw(rel, &format!("# {}\n{body}", self.provenance(None).header_line()))
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, data: &T) -> CliResult<PathBuf> {
        let wrapped = Wrapped {
            provenance: self.provenance(None),
            data,
        };
        let text = serde_json::to_string_pretty(&wrapped).expect("report serializes");
        self.write_raw(rel, &(text + "\n"))
    }

    pub fn write_svg(&self, rel: &str, svg: &str) -> CliResult<PathBuf> {
        let comment = format!("<!-- {} -->\n", self.provenance(None).header_line());
        self.write_raw(rel, &(comment + svg))
    }

    pub fn write_markdown(&self, rel: &str, body: &str) -> CliResult<PathBuf> {
        self.write_raw(
            rel,
            &format!("<!-- {} -->\n{body}", self.provenance(None).header_line()),
        )
    }

    /// Writes an artifact whose format has no room for a header and puts
    /// the provenance in `<file>.prov.json` next to it.
    pub fn write_with_sidecar(
        &self,
        rel: &str,
        stage_key: Option<String>,
        write: impl FnOnce(&mut BufWriter<fs::File>) -> dialign::Result<()>,
    ) -> CliResult<PathBuf> {
        let path = self.path(rel);
        write_file_with_sidecar(&path, &self.provenance(stage_key), write)?;
        Ok(path)
    }

    pub fn write_corpus(&self, rel: &str, corpus: &Corpus) -> CliResult<PathBuf> {
        self.write_with_sidecar(rel, None, |w| corpus.write_to(w))
    }

    /// Channel ids to process: the configured list, else every corpus file
    /// under `corpora/` sorted by name.
    pub fn channels(&self) -> CliResult<Vec<String>> {
        if !self.config.channels.is_empty() {
            return Ok(self.config.channels.clone());
        }
        let dir = self.path(CORPORA);
        let entries = fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                e.file_name()
                    .to_str()
                    .and_then(|n| n.strip_suffix(".txt"))
                    .map(str::to_string)
            })
            .collect();
        ids.sort();
        if ids.is_empty() {
            return Err(CliError::Usage(format!("no corpora found under {}", dir.display())));
        }
        Ok(ids)
    }

    pub fn read_corpus(path: &Path, fallback_id: &str) -> CliResult<Corpus> {
        let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        Ok(Corpus::read_from(BufReader::new(file), fallback_id)?)
    }

    pub fn raw_corpora(&self) -> CliResult<Vec<Corpus>> {
        self.channels()?
            .iter()
            .map(|id| Self::read_corpus(&self.path(&format!("{CORPORA}/{id}.txt")), id))
            .collect()
    }

    fn balance_key(&self, channels: &[String]) -> CliResult<String> {
        let a = &self.config.analysis;
        let mut material = serde_json::to_string(&(
            channels,
            self.config.balance_seed(),
            a.source_size,
            a.target_size,
            a.trigram,
        ))
        .expect("key serializes")
        .into_bytes();
        for id in channels {
            let path = self.path(&format!("{CORPORA}/{id}.txt"));
            material.extend(fs::read(&path).map_err(|e| CliError::io(&path, e))?);
        }
        Ok(digest_hex(&material))
    }

    fn train_key(&self, balance_key: &str) -> String {
        let material = serde_json::to_string(&(balance_key, &self.config.analysis.train, self.config.seed))
            .expect("key serializes");
        digest_hex(material.as_bytes())
    }

    fn stage_matches(&self, dir: &str, key: &str) -> bool {
        fs::read_to_string(self.path(&format!("{dir}/{STAGE_FILE}")))
            .ok()
            .and_then(|t| serde_json::from_str::<Provenance>(&t).ok())
            .is_some_and(|p| p.stage_key.as_deref() == Some(key))
    }

    fn mark_stage(&self, dir: &str, key: String) -> CliResult<()> {
        let prov = serde_json::to_string_pretty(&self.provenance(Some(key))).expect("provenance serializes");
        self.write_raw(&format!("{dir}/{STAGE_FILE}"), &(prov + "\n"))?;
        Ok(())
    }

    /// Balanced corpora and vocabularies, from cache when the inputs and
    /// settings are unchanged. Returns whether work was done.
    pub fn ensure_prepared(&self) -> CliResult<(Prepared, bool)> {
        let channels = self.channels()?;
        let key = self.balance_key(&channels)?;
        if self.stage_matches(BALANCED, &key) {
            return Ok((self.load_prepared(&channels)?, false));
        }
        let prepared = prepare(&self.raw_corpora()?, &self.config.analysis, self.config.balance_seed())?;
        for c in &prepared.corpora {
            self.write_corpus(&format!("{BALANCED}/{}.txt", c.language_id), c)?;
        }
        self.write_with_sidecar(&format!("{VOCAB}/source.tsv"), None, |w| {
            prepared.source_vocab.write_to(w)
        })?;
        self.write_with_sidecar(&format!("{VOCAB}/target.tsv"), None, |w| {
            prepared.target_vocab.write_to(w)
        })?;
        self.mark_stage(BALANCED, key)?;
        Ok((prepared, true))
    }

    fn load_prepared(&self, channels: &[String]) -> CliResult<Prepared> {
        let corpora = channels
            .iter()
            .map(|id| Self::read_corpus(&self.path(&format!("{BALANCED}/{id}.txt")), id))
            .collect::<CliResult<Vec<_>>>()?;
        Ok(Prepared {
            corpora,
            source_vocab: read_vocab(&self.path(&format!("{VOCAB}/source.tsv")), VocabRole::Source)?,
            target_vocab: read_vocab(&self.path(&format!("{VOCAB}/target.tsv")), VocabRole::Target)?,
        })
    }

    /// A complete single-seed run, training only what the cache lacks.
    pub fn ensure_run(&self) -> CliResult<PipelineRun> {
        let channels = self.channels()?;
        let (prepared, _) = self.ensure_prepared()?;
        let key = self.train_key(&self.balance_key(&channels)?);
        if self.stage_matches(EMBEDDINGS, &key) {
            let spaces = channels
                .iter()
                .map(|id| read_space(&self.path(&format!("{EMBEDDINGS}/{id}.emb")), id))
                .collect::<CliResult<Vec<_>>>()?;
            return Ok(PipelineRun {
                seed: self.config.seed,
                config: self.config.analysis.clone(),
                corpora: prepared.corpora,
                source_vocab: prepared.source_vocab,
                target_vocab: prepared.target_vocab,
                spaces,
            });
        }
        let run = train_prepared(prepared, &self.config.analysis, self.config.seed)?;
        for s in &run.spaces {
            self.write_with_sidecar(&format!("{EMBEDDINGS}/{}.emb", s.language_id), Some(key.clone()), |w| {
                s.save(w)
            })?;
        }
        self.mark_stage(EMBEDDINGS, key)?;
        Ok(run)
    }
}

pub fn read_vocab(path: &Path, role: VocabRole) -> CliResult<Vocabulary> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(Vocabulary::read_from(BufReader::new(file), role)?)
}

pub fn read_space(path: &Path, fallback_id: &str) -> CliResult<EmbeddingSpace> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(EmbeddingSpace::load(BufReader::new(file), fallback_id)?)
}

/// Body lines of a CSV artifact, provenance lines removed.
pub fn csv_body(text: &str) -> impl Iterator<Item = &str> {
    text.lines().filter(|l| !l.starts_with('#'))
}

pub fn write_file_with_sidecar(
    path: &Path,
    provenance: &Provenance,
    write: impl FnOnce(&mut BufWriter<fs::File>) -> dialign::Result<()>,
) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    w.flush().map_err(|e| CliError::io(path, e))?;
    let mut side = path.as_os_str().to_owned();
    side.push(".prov.json");
    let side = PathBuf::from(side);
    let prov = serde_json::to_string_pretty(provenance).expect("provenance serializes");
    fs::write(&side, prov + "\n").map_err(|e| CliError::io(&side, e))
}
