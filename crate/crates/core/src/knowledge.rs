//! Encyclopedia background for entity phrases.
//!
//! A phrase resolves through, in order: the override file (phrase -> page
//! title), the on-disk cache, and, only when online, a remote search whose
//! top hit is summarized. Every remote answer, including "no page", is
//! cached, so a cached phrase never touches the network.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::http::{encode_component, RetryPolicy, Transport, TransportError};
use crate::pipeline::{split_sentences, BackgroundSource};
use crate::similarity::normalize_mention;

/// Environment variable naming the cache directory.
pub const CACHE_DIR_ENV: &str = "NEWSSTAKE_CACHE_DIR";

pub const DEFAULT_BASE_URL: &str = "https://en.wikipedia.org";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRef {
    pub title: String,
    pub url: String,
    pub summary: String,
}

/// Manual phrase -> page title links.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides(BTreeMap<String, String>);

impl Overrides {
    pub fn new(map: BTreeMap<String, String>) -> Self {
        Self(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Ok(Self(map))
    }

    pub fn title_for(&self, phrase: &str) -> Option<&str> {
        self.0.get(phrase).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    page: Option<PageRef>,
    fetched_at: DateTime<Utc>,
}

/// One JSON file per normalized phrase under a directory.
#[derive(Debug, Clone)]
pub struct KnowledgeCache {
    dir: PathBuf,
}

impl KnowledgeCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// File name for a normalized key: readable when the key is plain
    /// ASCII, otherwise a digest.
    fn file_for(&self, key: &str) -> PathBuf {
        let readable = key.len() <= 80
            && key
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b' ');
        let stem = if readable {
            key.replace(' ', "_")
        } else {
            format!("h-{}", &hex::encode(Sha256::digest(key.as_bytes()))[..32])
        };
        self.dir.join(format!("{stem}.json"))
    }

    /// `None` when the key was never cached; `Some(None)` for a cached miss.
    pub fn get(&self, key: &str) -> Result<Option<Option<PageRef>>> {
        let path = self.file_for(key);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        let entry: CacheEntry = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if entry.key != key {
            // Digest collision or a hand-edited file; treat as absent.
            return Ok(None);
        }
        Ok(Some(entry.page))
    }

    /// Writes through a temporary file and renames, so readers never see a
    /// partial entry.
    pub fn put(&self, key: &str, page: Option<&PageRef>) -> Result<()> {
        let entry = CacheEntry {
            key: key.to_string(),
            page: page.cloned(),
            fetched_at: Utc::now(),
        };
        let path = self.file_for(key);
        let mut body = serde_json::to_string_pretty(&entry).expect("cache entry serializes");
        body.push('\n');
        let tmp = tempfile_in(&self.dir);
        std::fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

fn tempfile_in(dir: &Path) -> PathBuf {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    dir.join(format!(".tmp-{}-{n}", std::process::id()))
}

/// Search + summary client for a MediaWiki-style REST API.
#[derive(Clone)]
pub struct RemoteEncyclopedia {
    base_url: String,
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for RemoteEncyclopedia {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEncyclopedia")
            .field("base_url", &self.base_url)
            .finish()
    }
}

impl RemoteEncyclopedia {
    pub fn new(base_url: impl Into<String>, transport: Arc<dyn Transport>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            transport,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn get(&self, url: &str) -> std::result::Result<Option<Value>, TransportError> {
        match self.retry.run(|| self.transport.get_json(url)) {
            Ok(v) => Ok(Some(v)),
            Err(TransportError::Status { code: 404, .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Title of the top search hit.
    pub fn search(&self, phrase: &str) -> std::result::Result<Option<String>, TransportError> {
        let url = format!(
            "{}/w/rest.php/v1/search/page?q={}&limit=1",
            self.base_url,
            encode_component(phrase)
        );
        let Some(body) = self.get(&url)? else {
            return Ok(None);
        };
        let pages = body
            .get("pages")
            .and_then(Value::as_array)
            .ok_or_else(|| TransportError::Decode("search response without \"pages\"".into()))?;
        Ok(pages
            .first()
            .and_then(|p| p.get("title"))
            .and_then(Value::as_str)
            .map(str::to_string))
    }

    pub fn summary(&self, title: &str) -> std::result::Result<Option<PageRef>, TransportError> {
        let url = format!(
            "{}/api/rest_v1/page/summary/{}",
            self.base_url,
            encode_component(&title.replace(' ', "_"))
        );
        let Some(body) = self.get(&url)? else {
            return Ok(None);
        };
        let extract = body.get("extract").and_then(Value::as_str).unwrap_or("").trim();
        if extract.is_empty() {
            return Ok(None);
        }
        let page_title = body.get("title").and_then(Value::as_str).unwrap_or(title);
        let page_url = body
            .pointer("/content_urls/desktop/page")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| format!("{}/wiki/{}", self.base_url, encode_component(&page_title.replace(' ', "_"))));
        Ok(Some(PageRef {
            title: page_title.to_string(),
            url: page_url,
            summary: extract.to_string(),
        }))
    }
}

/// Resolves a phrase to a page. `remote` is `None` in offline mode, where a
/// cache miss simply yields `None`.
pub fn lookup_page(
    phrase: &str,
    cache: &KnowledgeCache,
    overrides: &Overrides,
    remote: Option<&RemoteEncyclopedia>,
) -> Result<Option<PageRef>> {
    let network_error = |e: TransportError| Error::Knowledge {
        phrase: phrase.to_string(),
        message: e.to_string(),
    };

    if let Some(title) = overrides.title_for(phrase) {
        let key = normalize_mention(title);
        if let Some(hit) = cache.get(&key)? {
            return Ok(hit);
        }
        let Some(remote) = remote else {
            return Ok(None);
        };
        let page = remote.summary(title).map_err(network_error)?;
        cache.put(&key, page.as_ref())?;
        return Ok(page);
    }

    let key = normalize_mention(phrase);
    if key.is_empty() {
        return Ok(None);
    }
    if let Some(hit) = cache.get(&key)? {
        return Ok(hit);
    }
    let Some(remote) = remote else {
        return Ok(None);
    };
    let page = match remote.search(phrase).map_err(network_error)? {
        Some(title) => remote.summary(&title).map_err(network_error)?,
        None => None,
    };
    cache.put(&key, page.as_ref())?;
    Ok(page)
}

/// The first `n` sentences of the page summary.
pub fn intro_sentences(page: &PageRef, n: usize) -> String {
    split_sentences(&page.summary)
        .into_iter()
        .take(n.max(1))
        .map(|s| s.text)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Overrides + cache + optional remote, usable as a background source.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub cache: KnowledgeCache,
    pub overrides: Overrides,
    pub remote: Option<RemoteEncyclopedia>,
    pub sentences: usize,
}

impl KnowledgeBase {
    pub fn lookup(&self, phrase: &str) -> Result<Option<PageRef>> {
        lookup_page(phrase, &self.cache, &self.overrides, self.remote.as_ref())
    }
}

impl BackgroundSource for KnowledgeBase {
    fn background(&self, phrase: &str) -> Result<Option<String>> {
        Ok(self
            .lookup(phrase)?
            .map(|page| intro_sentences(&page, self.sentences))
            .filter(|s| !s.is_empty()))
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use serde_json::json;

    use super::*;
    use crate::sidecar::testing::FakeTransport;

    const DEMONETISATION_SUMMARY: &str = "On 8 November 2016, the Government of India announced the demonetisation of all ₹500 and ₹1,000 banknotes of the Mahatma Gandhi Series. It also announced the issuance of new ₹500 and ₹2,000 banknotes in exchange for the demonetised banknotes. Prime Minister Narendra Modi claimed that the action would curtail the shadow economy.";

    fn fake_wiki() -> Arc<FakeTransport> {
        Arc::new(FakeTransport::new(|url, _| {
            if url.contains("/search/page") {
                if url.contains("Nobody") {
                    Ok(json!({ "pages": [] }))
                } else {
                    Ok(json!({ "pages": [{ "title": "Reserve Bank of India", "key": "Reserve_Bank_of_India" }] }))
                }
            } else if url.contains("/page/summary/Reserve_Bank_of_India") {
                Ok(json!({
                    "title": "Reserve Bank of India",
                    "extract": "The Reserve Bank of India is India's central bank. It regulates the banking sector.",
                    "content_urls": { "desktop": { "page": "https://en.wikipedia.org/wiki/Reserve_Bank_of_India" } }
                }))
            } else {
                Err(TransportError::Status { code: 404, body: String::new() })
            }
        }))
    }

    fn remote(t: Arc<FakeTransport>) -> RemoteEncyclopedia {
        RemoteEncyclopedia::new("https://wiki.test", t).with_retry(RetryPolicy {
            retries: 1,
            base: Duration::from_millis(1),
        })
    }

    fn page(title: &str, summary: &str) -> PageRef {
        PageRef {
            title: title.into(),
            url: format!("https://wiki.test/wiki/{title}"),
            summary: summary.into(),
        }
    }

    #[test]
    fn override_takes_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KnowledgeCache::open(dir.path()).unwrap();
        let rbi = page("Reserve Bank of India", "The central bank.");
        cache.put("reserve bank of india", Some(&rbi)).unwrap();
        // A cached entry for the phrase itself must lose to the override.
        cache.put("rbi", Some(&page("RBI (band)", "A band."))).unwrap();
        let overrides = Overrides::new([("RBI".to_string(), "Reserve Bank of India".to_string())].into());
        assert_eq!(lookup_page("RBI", &cache, &overrides, None).unwrap(), Some(rbi));
    }

    #[test]
    fn offline_miss_is_none() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KnowledgeCache::open(dir.path()).unwrap();
        assert_eq!(lookup_page("RBI", &cache, &Overrides::default(), None).unwrap(), None);
    }

    #[test]
    fn second_lookup_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KnowledgeCache::open(dir.path()).unwrap();
        let fake = fake_wiki();
        let remote = remote(fake.clone());
        let first = lookup_page("RBI", &cache, &Overrides::default(), Some(&remote)).unwrap();
        assert_eq!(first.as_ref().unwrap().title, "Reserve Bank of India");
        let calls = fake.call_count();
        assert_eq!(calls, 2);
        let second = lookup_page("RBI", &cache, &Overrides::default(), Some(&remote)).unwrap();
        assert_eq!(second, first);
        assert_eq!(fake.call_count(), calls);
    }

    #[test]
    fn negative_results_are_cached() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KnowledgeCache::open(dir.path()).unwrap();
        let fake = fake_wiki();
        let remote = remote(fake.clone());
        assert_eq!(lookup_page("Nobody", &cache, &Overrides::default(), Some(&remote)).unwrap(), None);
        let calls = fake.call_count();
        assert_eq!(lookup_page("Nobody", &cache, &Overrides::default(), Some(&remote)).unwrap(), None);
        assert_eq!(fake.call_count(), calls);
        assert_eq!(cache.get("nobody").unwrap(), Some(None));
    }

    #[test]
    fn network_failure_is_retryable_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KnowledgeCache::open(dir.path()).unwrap();
        let fake = Arc::new(FakeTransport::new(|_, _| Err(TransportError::Connect("down".into()))));
        let err = lookup_page("RBI", &cache, &Overrides::default(), Some(&remote(fake))).unwrap_err();
        assert!(err.is_retryable());
        assert_eq!(cache.get("rbi").unwrap(), None);
    }

    #[test]
    fn cache_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let p = page("Société Générale", "A French bank.");
        {
            let cache = KnowledgeCache::open(dir.path()).unwrap();
            cache.put("société générale", Some(&p)).unwrap();
            cache.put("rbi", None).unwrap();
        }
        let cache = KnowledgeCache::open(dir.path()).unwrap();
        assert_eq!(cache.get("société générale").unwrap(), Some(Some(p)));
        assert_eq!(cache.get("rbi").unwrap(), Some(None));
        assert_eq!(cache.get("sbi").unwrap(), None);
        assert!(dir.path().join("rbi.json").exists());
    }

    #[test]
    fn intro_sentence_examples() {
        let p = page("X", "A. B. C.");
        assert_eq!(intro_sentences(&p, 2), "A. B.");
        assert_eq!(intro_sentences(&p, 10), "A. B. C.");
        let demo = page("2016 Indian banknote demonetisation", DEMONETISATION_SUMMARY);
        assert_eq!(
            intro_sentences(&demo, 1),
            "On 8 November 2016, the Government of India announced the demonetisation of all ₹500 and ₹1,000 banknotes of the Mahatma Gandhi Series."
        );
    }
}
