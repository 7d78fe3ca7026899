#include "comedia/dracor_client.hpp"

#include "comedia/error.hpp"
#include "comedia/fsutil.hpp"
#include "comedia/log.hpp"
#include "comedia/tei_parser.hpp"
#include "comedia/text.hpp"
#include "xml_tree.hpp"

#include "httplib.h"

#include <algorithm>
#include <thread>

namespace comedia {
namespace {

class HttplibTransport : public Transport {
public:
    explicit HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

    HttpResponse get(const std::string& url) override {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw Error(ErrorKind::InvalidArgument, "not an absolute URL: " + url);
        const auto path_start = url.find('/', scheme_end + 3);
        const std::string origin = url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
        httplib::Client client(origin);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_follow_location(true);
        auto result = client.Get(path);
        if (!result) {
            throw Error(ErrorKind::NetworkUnreachable, url + ": " + httplib::to_string(result.error()));
        }
        return {result->status, result->body};
    }

private:
    std::chrono::seconds timeout_;
};

void sort_refs(std::vector<PlayRef>& refs) {
    std::sort(refs.begin(), refs.end(), [](const PlayRef& a, const PlayRef& b) { return a.play_name < b.play_name; });
}

std::filesystem::path play_path(const std::filesystem::path& cache_dir, const PlayRef& play) {
    return corpus_cache_dir(cache_dir, play.corpus_id) / (play.play_name + ".xml");
}

void write_manifest(const std::filesystem::path& cache_dir, const CorpusManifest& manifest) {
    try {
        atomic_write(manifest_path(cache_dir, manifest.corpus_id), manifest.to_json().dump(2) + "\n");
    } catch (const Error& e) {
        throw Error(ErrorKind::CacheWriteFailure, e.what());
    }
}

}  // namespace

nlohmann::json CorpusManifest::to_json() const {
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& p : plays) refs.push_back({{"play_name", p.play_name}, {"title", p.title}});
    return {{"corpus_id", corpus_id},
            {"fetched_at", fetched_at},
            {"plays", refs},
            {"content_digests", content_digests},
            {"errors", errors}};
}

CorpusManifest CorpusManifest::from_json(const nlohmann::json& j) {
    CorpusManifest m;
    m.corpus_id = j.at("corpus_id").get<std::string>();
    m.fetched_at = j.value("fetched_at", "");
    for (const auto& p : j.at("plays")) {
        m.plays.push_back({m.corpus_id, p.at("play_name").get<std::string>(), p.value("title", "")});
    }
    m.content_digests = j.value("content_digests", std::map<std::string, std::string>{});
    m.errors = j.value("errors", std::map<std::string, std::string>{});
    return m;
}

std::unique_ptr<Transport> make_http_transport(std::chrono::seconds timeout) {
    return std::make_unique<HttplibTransport>(timeout);
}

DracorApiSource::DracorApiSource(Transport& transport, std::string base_url, std::chrono::milliseconds min_interval)
    : transport_(transport), base_url_(std::move(base_url)), min_interval_(min_interval) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

HttpResponse DracorApiSource::request(const std::string& url) {
    {
        std::lock_guard lock(pace_mutex_);
        const auto now = std::chrono::steady_clock::now();
        const auto ready = last_request_ + min_interval_;
        if (last_request_ != std::chrono::steady_clock::time_point{} && now < ready) std::this_thread::sleep_until(ready);
        last_request_ = std::chrono::steady_clock::now();
    }
    ++requests_;
    return transport_.get(url);
}

std::vector<PlayRef> DracorApiSource::list_plays(const std::string& corpus_id) {
    const auto response = request(base_url_ + "/corpora/" + corpus_id);
    if (response.status == 404) throw Error(ErrorKind::UnknownCorpus, corpus_id);
    if (response.status != 200) {
        throw Error(ErrorKind::HttpFailure, "corpus listing returned HTTP " + std::to_string(response.status));
    }
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(response.body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedResponse, std::string("corpus listing is not JSON: ") + e.what());
    }
    if (!body.contains("plays") || !body["plays"].is_array()) {
        throw Error(ErrorKind::MalformedResponse, "corpus listing lacks a plays array");
    }
    std::vector<PlayRef> refs;
    for (const auto& p : body["plays"]) {
        const auto name = p.value("name", "");
        if (name.empty()) continue;
        refs.push_back({corpus_id, name, p.value("title", "")});
    }
    sort_refs(refs);
    return refs;
}

std::string DracorApiSource::fetch_tei(const PlayRef& play) {
    const auto response = request(base_url_ + "/corpora/" + play.corpus_id + "/plays/" + play.play_name + "/tei");
    if (response.status != 200) {
        throw Error(ErrorKind::HttpFailure, play.play_name + ": HTTP " + std::to_string(response.status));
    }
    return response.body;
}

DirectorySource::DirectorySource(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::vector<PlayRef> DirectorySource::list_plays(const std::string& corpus_id) {
    std::vector<PlayRef> refs;
    if (!std::filesystem::is_directory(dir_)) {
        throw Error(ErrorKind::UnknownCorpus, "TEI directory does not exist: " + dir_.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".xml") continue;
        std::string title;
        try {
            title = read_tei_title(read_file(entry.path()));
        } catch (const Error&) {
            // Listed anyway; the malformed payload surfaces at fetch time.
        }
        refs.push_back({corpus_id, entry.path().stem().string(), title});
    }
    if (refs.empty()) warn("no TEI files found in " + dir_.string());
    sort_refs(refs);
    return refs;
}

std::string DirectorySource::fetch_tei(const PlayRef& play) { return read_file(dir_ / (play.play_name + ".xml")); }

std::filesystem::path corpus_cache_dir(const std::filesystem::path& cache_dir, const std::string& corpus_id) {
    return cache_dir / corpus_id;
}

std::filesystem::path manifest_path(const std::filesystem::path& cache_dir, const std::string& corpus_id) {
    return corpus_cache_dir(cache_dir, corpus_id) / "manifest.json";
}

std::optional<CorpusManifest> load_manifest(const std::filesystem::path& cache_dir, const std::string& corpus_id) {
    const auto path = manifest_path(cache_dir, corpus_id);
    if (!std::filesystem::exists(path)) return std::nullopt;
    try {
        return CorpusManifest::from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        warn("ignoring unreadable manifest " + path.string() + ": " + e.what());
        return std::nullopt;
    }
}

DracorClient::DracorClient(CorpusSource& source, ClientOptions options) : source_(source), options_(options) {
    if (options_.max_concurrency == 0) options_.max_concurrency = 1;
}

std::vector<PlayRef> DracorClient::list_plays(const std::string& corpus_id, const std::filesystem::path& cache_dir) {
    try {
        return source_.list_plays(corpus_id);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NetworkUnreachable || cache_dir.empty()) throw;
        auto manifest = load_manifest(cache_dir, corpus_id);
        if (!manifest) throw;
        warn("source unreachable; using cached manifest for corpus " + corpus_id);
        auto refs = manifest->plays;
        sort_refs(refs);
        return refs;
    }
}

DracorClient::Fetched DracorClient::fetch_into_cache(const PlayRef& play, const std::filesystem::path& cache_dir,
                                                     const std::map<std::string, std::string>& known_digests) {
    const auto path = play_path(cache_dir, play);
    if (std::filesystem::exists(path)) {
        auto text = read_file(path);
        auto digest = sha256_hex(text);
        auto known = known_digests.find(play.play_name);
        if (known == known_digests.end() || known->second == digest) return {std::move(text), std::move(digest), false};
        warn("cached TEI for " + play.play_name + " does not match its manifest digest; refetching");
    }
    auto text = source_.fetch_tei(play);
    ++downloads_;
    if (!xml::is_well_formed(text)) throw Error(ErrorKind::MalformedResponse, play.play_name + ": payload is not XML");
    try {
        atomic_write(path, text);
    } catch (const Error& e) {
        throw Error(ErrorKind::CacheWriteFailure, e.what());
    }
    auto digest = sha256_hex(text);
    return {std::move(text), std::move(digest), true};
}

std::string DracorClient::fetch_tei(const PlayRef& play, const std::filesystem::path& cache_dir) {
    auto manifest = load_manifest(cache_dir, play.corpus_id);
    const auto digests = manifest ? manifest->content_digests : std::map<std::string, std::string>{};
    auto fetched = fetch_into_cache(play, cache_dir, digests);

    std::lock_guard lock(manifest_mutex_);
    auto current = load_manifest(cache_dir, play.corpus_id).value_or(CorpusManifest{play.corpus_id, {}, {}, {}, {}});
    auto& stored = current.content_digests[play.play_name];
    const bool listed = std::any_of(current.plays.begin(), current.plays.end(),
                                    [&](const PlayRef& p) { return p.play_name == play.play_name; });
    if (stored != fetched.digest || !listed) {
        stored = fetched.digest;
        if (!listed) {
            current.plays.push_back(play);
            sort_refs(current.plays);
        }
        current.errors.erase(play.play_name);
        current.fetched_at = utc_timestamp();
        write_manifest(cache_dir, current);
    }
    return std::move(fetched.text);
}

SyncReport DracorClient::sync_corpus(const std::string& corpus_id, const std::filesystem::path& cache_dir) {
    const auto plays = list_plays(corpus_id, cache_dir);
    const auto previous = load_manifest(cache_dir, corpus_id);
    const auto known = previous ? previous->content_digests : std::map<std::string, std::string>{};

    struct Outcome {
        std::optional<Fetched> fetched;
        std::string error;
    };
    std::vector<Outcome> outcomes(plays.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < plays.size(); i = next++) {
            try {
                outcomes[i].fetched = fetch_into_cache(plays[i], cache_dir, known);
            } catch (const Error& e) {
                outcomes[i].error = e.what();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const auto n = std::min(options_.max_concurrency, std::max<std::size_t>(plays.size(), 1));
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    }

    SyncReport report;
    report.manifest.corpus_id = corpus_id;
    report.manifest.fetched_at = utc_timestamp();
    for (std::size_t i = 0; i < plays.size(); ++i) {
        if (outcomes[i].fetched) {
            report.manifest.plays.push_back(plays[i]);
            report.manifest.content_digests[plays[i].play_name] = outcomes[i].fetched->digest;
            (outcomes[i].fetched->downloaded ? report.downloaded : report.from_cache)++;
        } else {
            report.manifest.errors[plays[i].play_name] = outcomes[i].error;
            ++report.failed;
            warn("failed to fetch " + plays[i].play_name + ": " + outcomes[i].error);
        }
    }
    std::lock_guard lock(manifest_mutex_);
    write_manifest(cache_dir, report.manifest);
    return report;
}

}  // namespace comedia
