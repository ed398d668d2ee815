#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "rwfast/spectral_pack.hpp"

namespace rwfast {

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Loaded packs keyed by canonical path, shared read-only by every session.
class PackCache {
 public:
  std::shared_ptr<const SpectralPack> get(const std::filesystem::path& path);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const SpectralPack>> packs_;
};

struct Session;

/// Interactive segmentation sessions behind a transport-neutral request
/// handler. One solve per session at a time; sessions are independent.
class SessionStore {
 public:
  explicit SessionStore(std::shared_ptr<PackCache> cache = std::make_shared<PackCache>());
  ~SessionStore();

  /// Routes `METHOD path` (query string already split off) to an endpoint.
  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::map<std::string, std::string>& query, const std::string& body);

  /// Holds a session's solve slot; requests that need it get 409 meanwhile.
  class SolveGuard {
   public:
    SolveGuard() = default;
    explicit SolveGuard(std::shared_ptr<Session> session);
    SolveGuard(SolveGuard&& other) noexcept;
    SolveGuard& operator=(SolveGuard&& other) noexcept;
    SolveGuard(const SolveGuard&) = delete;
    SolveGuard& operator=(const SolveGuard&) = delete;
    ~SolveGuard();
    bool acquired() const { return session_ != nullptr; }

   private:
    std::shared_ptr<Session> session_;
  };

  /// Empty guard when the session is unknown or already solving.
  SolveGuard try_begin_solve(const std::string& id);

  std::size_t session_count() const;
  const PackCache& cache() const { return *cache_; }

 private:
  std::shared_ptr<Session> find(const std::string& id) const;
  HttpResponse create(const std::string& body);
  HttpResponse slice(Session& s, const std::map<std::string, std::string>& query);
  HttpResponse params(const std::shared_ptr<Session>& s, const std::string& body);
  HttpResponse seeds(const std::shared_ptr<Session>& s, const std::string& body);

  std::shared_ptr<PackCache> cache_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

/// HTTP front end over a SessionStore.
class HttpService {
 public:
  explicit HttpService(SessionStore& store);
  ~HttpService();

  /// Binds to `host`:`port` (0 = any free port) and returns the bound port,
  /// or -1 on failure.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rwfast
