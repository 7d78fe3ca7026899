#pragma once

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace comedia {

inline constexpr const char* kDefaultApiBase = "https://dracor.org/api/v1";
inline constexpr const char* kDefaultCorpus = "cal";

struct PlayRef {
    std::string corpus_id;
    std::string play_name;  // DraCor slug
    std::string title;

    bool operator==(const PlayRef&) const = default;
};

struct CorpusManifest {
    std::string corpus_id;
    std::vector<PlayRef> plays;
    std::string fetched_at;
    std::map<std::string, std::string> content_digests;  // play_name -> sha256
    std::map<std::string, std::string> errors;           // play_name -> failure

    nlohmann::json to_json() const;
    static CorpusManifest from_json(const nlohmann::json& j);
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Blocking HTTP GET. Implementations throw Error(NetworkUnreachable) when no
/// connection can be made; HTTP error statuses are returned, not thrown.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse get(const std::string& url) = 0;
};

std::unique_ptr<Transport> make_http_transport(std::chrono::seconds timeout = std::chrono::seconds(30));

/// Where plays come from: the DraCor API or a local TEI directory.
class CorpusSource {
public:
    virtual ~CorpusSource() = default;
    virtual std::vector<PlayRef> list_plays(const std::string& corpus_id) = 0;
    virtual std::string fetch_tei(const PlayRef& play) = 0;
};

class DracorApiSource : public CorpusSource {
public:
    DracorApiSource(Transport& transport, std::string base_url = kDefaultApiBase,
                    std::chrono::milliseconds min_interval = std::chrono::milliseconds(100));

    std::vector<PlayRef> list_plays(const std::string& corpus_id) override;
    std::string fetch_tei(const PlayRef& play) override;

    std::size_t requests() const { return requests_.load(); }

private:
    HttpResponse request(const std::string& url);

    Transport& transport_;
    std::string base_url_;
    std::chrono::milliseconds min_interval_;
    std::mutex pace_mutex_;
    std::chrono::steady_clock::time_point last_request_{};
    std::atomic<std::size_t> requests_{0};
};

/// Offline source: every *.xml file in a directory is one play, named by its
/// file stem.
class DirectorySource : public CorpusSource {
public:
    explicit DirectorySource(std::filesystem::path dir);

    std::vector<PlayRef> list_plays(const std::string& corpus_id) override;
    std::string fetch_tei(const PlayRef& play) override;

private:
    std::filesystem::path dir_;
};

struct SyncReport {
    CorpusManifest manifest;
    std::size_t downloaded = 0;
    std::size_t from_cache = 0;
    std::size_t failed = 0;
};

struct ClientOptions {
    std::size_t max_concurrency = 4;
};

/// Cache layout: <cache_dir>/<corpus_id>/<play_name>.xml and
/// <cache_dir>/<corpus_id>/manifest.json.
class DracorClient {
public:
    explicit DracorClient(CorpusSource& source, ClientOptions options = {});

    /// Sorted by play_name. If the source is unreachable and `cache_dir` holds
    /// a manifest for the corpus, the manifest's plays are returned instead.
    std::vector<PlayRef> list_plays(const std::string& corpus_id, const std::filesystem::path& cache_dir = {});

    /// Serves from cache when the cached file's digest matches the manifest;
    /// refetches and overwrites on mismatch.
    std::string fetch_tei(const PlayRef& play, const std::filesystem::path& cache_dir);

    SyncReport sync_corpus(const std::string& corpus_id, const std::filesystem::path& cache_dir);

    /// Number of TEI payloads pulled from the source (cache misses).
    std::size_t downloads() const { return downloads_.load(); }

private:
    struct Fetched {
        std::string text;
        std::string digest;
        bool downloaded = false;
    };

    Fetched fetch_into_cache(const PlayRef& play, const std::filesystem::path& cache_dir,
                             const std::map<std::string, std::string>& known_digests);

    CorpusSource& source_;
    ClientOptions options_;
    std::atomic<std::size_t> downloads_{0};
    std::mutex manifest_mutex_;
};

std::filesystem::path corpus_cache_dir(const std::filesystem::path& cache_dir, const std::string& corpus_id);
std::filesystem::path manifest_path(const std::filesystem::path& cache_dir, const std::string& corpus_id);

/// Loads <cache_dir>/<corpus_id>/manifest.json if present.
std::optional<CorpusManifest> load_manifest(const std::filesystem::path& cache_dir, const std::string& corpus_id);

}  // namespace comedia
