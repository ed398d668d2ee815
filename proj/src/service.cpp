#include "rwfast/service.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "rwfast/adaptive.hpp"
#include "rwfast/bench.hpp"
#include "rwfast/errors.hpp"
#include "rwfast/fast_rw.hpp"
#include "rwfast/png.hpp"
#include "rwfast/refresh.hpp"

namespace rwfast {

using json = nlohmann::json;

struct Session {
  std::string id;
  Image image;
  PackSet packs;
  int labels = 2;
  double gamma = 0.0;
  double beta = 0.0;
  double epsilon = 0.1;
  std::size_t base_index = 0;
  std::shared_ptr<const RefreshedPack> refreshed;  // null when beta is a pack's own beta
  Laplacian lap;                                   // normalized, at beta
  std::atomic<bool> busy{false};

  const SpectralPack& base() const { return *packs.packs()[base_index]; }
};

namespace {

HttpResponse json_response(int status, const json& body) {
  return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, const std::string& kind, const std::string& message) {
  return json_response(status, {{"error", kind}, {"message", message}});
}

std::string base64(std::span<const std::uint8_t> data) {
  static constexpr char kTable[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += kTable[(v >> 6) & 63];
    out += kTable[v & 63];
  }
  if (i + 1 == data.size()) {
    const std::uint32_t v = data[i] << 16;
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == data.size()) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += kTable[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

json run_length(const std::vector<std::uint16_t>& labels) {
  json runs = json::array();
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    runs.push_back({labels[i], j - i});
    i = j;
  }
  return runs;
}

// Points the session at `beta`: a pack's own beta uses that pack directly,
// anything else refreshes the nearest pack.
void retarget(Session& s, double beta) {
  if (!(beta >= 0.0)) throw InvalidParam("beta must be >= 0");
  const std::size_t index = s.packs.nearest(beta);
  s.base_index = index;
  s.beta = beta;
  if (s.packs.packs()[index]->beta == beta) {
    s.refreshed.reset();
    s.lap = laplacian(build_graph(s.image, beta), LaplacianMode::Normalized);
  } else {
    auto r = std::make_shared<const RefreshedPack>(refresh(s.packs.packs()[index], s.image, beta));
    s.lap = r->laplacian();
    s.refreshed = std::move(r);
  }
}

std::vector<std::pair<Index, int>> parse_seeds(const json& body) {
  if (!body.contains("seeds") || !body["seeds"].is_array()) {
    throw InvalidParam("body needs a 'seeds' array");
  }
  std::vector<std::pair<Index, int>> seeds;
  for (const auto& s : body["seeds"]) {
    if (s.is_array() && s.size() == 2) {
      seeds.emplace_back(s[0].get<Index>(), s[1].get<int>());
    } else if (s.is_object()) {
      seeds.emplace_back(s.at("index").get<Index>(), s.at("label").get<int>());
    } else {
      throw InvalidParam("seed entries are [index, label] or {index, label}");
    }
  }
  return seeds;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '/')) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

}  // namespace

std::shared_ptr<const SpectralPack> PackCache::get(const std::filesystem::path& path) {
  std::error_code ec;
  const auto canonical = std::filesystem::weakly_canonical(path, ec);
  const std::string key = ec ? path.string() : canonical.string();
  {
    std::lock_guard lock(mutex_);
    auto it = packs_.find(key);
    if (it != packs_.end()) return it->second;
  }
  auto pack = std::make_shared<const SpectralPack>(load_pack(path));
  std::lock_guard lock(mutex_);
  return packs_.emplace(key, std::move(pack)).first->second;
}

std::size_t PackCache::size() const {
  std::lock_guard lock(mutex_);
  return packs_.size();
}

SessionStore::SolveGuard::SolveGuard(std::shared_ptr<Session> session)
    : session_(std::move(session)) {}

SessionStore::SolveGuard::SolveGuard(SolveGuard&& other) noexcept
    : session_(std::move(other.session_)) {}

SessionStore::SolveGuard& SessionStore::SolveGuard::operator=(SolveGuard&& other) noexcept {
  if (this != &other) {
    if (session_) session_->busy.store(false);
    session_ = std::move(other.session_);
  }
  return *this;
}

SessionStore::SolveGuard::~SolveGuard() {
  if (session_) session_->busy.store(false);
}

SessionStore::SessionStore(std::shared_ptr<PackCache> cache) : cache_(std::move(cache)) {}
SessionStore::~SessionStore() = default;

std::size_t SessionStore::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::shared_ptr<Session> SessionStore::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

SessionStore::SolveGuard SessionStore::try_begin_solve(const std::string& id) {
  auto s = find(id);
  if (!s) return {};
  bool expected = false;
  if (!s->busy.compare_exchange_strong(expected, true)) return {};
  return SolveGuard(std::move(s));
}

HttpResponse SessionStore::handle(const std::string& method, const std::string& path,
                                  const std::map<std::string, std::string>& query,
                                  const std::string& body) {
  try {
    const auto parts = split_path(path);
    if (parts.empty() || parts[0] != "sessions") return error_response(404, "NotFound", path);
    if (parts.size() == 1) {
      if (method == "POST") return create(body);
      return error_response(405, "MethodNotAllowed", method + " " + path);
    }
    auto session = find(parts[1]);
    if (!session) return error_response(404, "UnknownSession", parts[1]);
    if (parts.size() == 2) {
      if (method == "DELETE") {
        std::lock_guard lock(mutex_);
        sessions_.erase(parts[1]);
        return json_response(200, {{"deleted", parts[1]}});
      }
      if (method == "GET") {
        const auto& d = session->image.dims.extents;
        return json_response(200, {{"id", session->id}, {"dims", d}, {"labels", session->labels},
                                   {"gamma", session->gamma}, {"beta", session->beta},
                                   {"base_beta", session->base().beta}});
      }
      return error_response(405, "MethodNotAllowed", method + " " + path);
    }
    if (parts.size() == 3) {
      if (parts[2] == "slice" && method == "GET") return slice(*session, query);
      if (parts[2] == "params" && method == "PUT") return params(session, body);
      if (parts[2] == "seeds" && method == "POST") return seeds(session, body);
    }
    return error_response(404, "NotFound", path);
  } catch (const json::exception& e) {
    return error_response(400, "BadRequest", e.what());
  } catch (const NumericError& e) {
    json j{{"error", "NumericError"}, {"message", e.what()}};
    if (const auto* s = dynamic_cast<const SingularSmallSystem*>(&e)) j["rcond"] = s->rcond();
    return json_response(500, j);
  } catch (const Error& e) {
    return error_response(422, "InvalidRequest", e.what());
  }
}

HttpResponse SessionStore::create(const std::string& body) {
  const json j = json::parse(body);
  auto s = std::make_shared<Session>();
  s->image = load_image(j.at("image").get<std::string>());
  std::vector<std::shared_ptr<const SpectralPack>> packs;
  for (const auto& p : j.at("packs")) packs.push_back(cache_->get(p.get<std::string>()));
  if (packs.empty()) throw InvalidParam("a session needs at least one pack");
  const ImageHash hash = image_content_hash(s->image);
  for (const auto& p : packs) {
    if (!(p->dims == s->image.dims) || p->image_hash != hash) {
      throw ImageMismatch("pack was built from a different image");
    }
  }
  s->packs = PackSet(std::move(packs));
  s->labels = j.value("labels", 2);
  if (s->labels < 2) throw InvalidParam("labels must be >= 2");
  s->gamma = j.value("gamma", 0.0);
  if (!(s->gamma >= 0.0)) throw InvalidParam("gamma must be >= 0");
  s->epsilon = j.value("epsilon", 0.1);
  if (!(s->epsilon > 0.0)) throw InvalidParam("epsilon must be > 0");
  retarget(*s, j.value("beta", s->packs.packs().front()->beta));
  {
    std::lock_guard lock(mutex_);
    s->id = "s" + std::to_string(next_id_++);
    sessions_[s->id] = s;
  }
  return json_response(201, {{"id", s->id},
                             {"dims", s->image.dims.extents},
                             {"labels", s->labels},
                             {"beta", s->beta},
                             {"base_beta", s->base().beta}});
}

HttpResponse SessionStore::slice(Session& s, const std::map<std::string, std::string>& query) {
  const Dims& dims = s.image.dims;
  const int nd = dims.ndim();
  auto get = [&](const char* key, Index fallback) {
    auto it = query.find(key);
    return it == query.end() ? fallback : static_cast<Index>(std::stoll(it->second));
  };
  const Index axis = get("axis", 2);
  const Index extent = nd == 3 ? dims.extents[std::clamp<Index>(axis, 0, 2)] : 1;
  const Index index = get("index", nd == 3 ? extent / 2 : 0);
  if (axis < 0 || axis > 2 || (nd == 2 && axis != 2)) throw IndexError("slice axis out of range");
  if (index < 0 || index >= extent) throw IndexError("slice index out of range");
  // The two remaining axes, ascending, span the picture.
  std::vector<int> plane;
  for (int a = 0; a < 3; ++a) {
    if (a != axis) plane.push_back(a);
  }
  auto ext = [&](int a) { return a < nd ? dims.extents[a] : Index{1}; };
  const Index w = ext(plane[0]);
  const Index h = ext(plane[1]);
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w * h));
  std::vector<Index> c(nd);
  for (Index v = 0; v < h; ++v) {
    for (Index u = 0; u < w; ++u) {
      std::array<Index, 3> full{0, 0, 0};
      full[axis] = index;
      full[plane[0]] = u;
      full[plane[1]] = v;
      for (int a = 0; a < nd; ++a) c[a] = full[a];
      const double val = s.image.at(dims.flat(c));
      pixels[v * w + u] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(val, 0.0, 1.0)));
    }
  }
  return {200, "image/png", encode_png_gray8(static_cast<int>(w), static_cast<int>(h), pixels)};
}

HttpResponse SessionStore::params(const std::shared_ptr<Session>& s, const std::string& body) {
  const json j = json::parse(body);
  SolveGuard guard = try_begin_solve(s->id);
  if (!guard.acquired()) return error_response(409, "SolveInFlight", s->id);
  if (j.contains("gamma")) {
    const double g = j["gamma"].get<double>();
    if (!(g >= 0.0)) throw InvalidParam("gamma must be >= 0");
    s->gamma = g;
  }
  if (j.contains("epsilon")) {
    const double e = j["epsilon"].get<double>();
    if (!(e > 0.0)) throw InvalidParam("epsilon must be > 0");
    s->epsilon = e;
  }
  if (j.contains("beta") && j["beta"].get<double>() != s->beta) retarget(*s, j["beta"].get<double>());
  return json_response(200, {{"gamma", s->gamma},
                             {"epsilon", s->epsilon},
                             {"beta", s->beta},
                             {"base_beta", s->base().beta},
                             {"refreshed", s->refreshed != nullptr}});
}

HttpResponse SessionStore::seeds(const std::shared_ptr<Session>& s, const std::string& body) {
  const json j = json::parse(body);
  SolveGuard guard = try_begin_solve(s->id);
  if (!guard.acquired()) return error_response(409, "SolveInFlight", s->id);
  const auto start = std::chrono::steady_clock::now();
  const Index n = s->image.size();
  const auto seed_list = parse_seeds(j);

  LabelProblem problem;
  problem.labels = s->labels;
  problem.gamma = s->gamma;
  problem.seeds = SeedPartition(n, seed_list);
  for (int l : problem.seeds.seed_labels()) {
    if (l >= s->labels) throw InvalidParam("seed label " + std::to_string(l) + " >= K");
  }
  if (problem.gamma > 0.0) problem.priors = gaussian_seed_priors(s->image, seed_list, s->labels);
  if (problem.gamma == 0.0 && seed_list.empty()) throw InvalidParam("gamma = 0 needs seeds");

  const PackBasis base(s->base());
  const ColumnBasis& basis =
      s->refreshed ? static_cast<const ColumnBasis&>(*s->refreshed) : static_cast<const ColumnBasis&>(base);
  FastSolveOptions fo;
  bool passed = true;
  if (j.contains("m_use")) {
    fo.m_use = j["m_use"].get<int>();
  } else {
    AdaptivePolicy policy;
    policy.epsilon = s->epsilon;
    const MSelection sel = select_m(basis, s->lap, problem, policy);
    fo.m_use = sel.m_use;
    passed = sel.passed;
  }
  FastSolveReport rep;
  ProbabilityField u = solve_fast(basis, s->lap, problem, fo, &rep);
  u.dims = s->image.dims;
  const LabelMap labels = hard_labels(u);
  std::vector<std::uint8_t> uncertainty(static_cast<std::size_t>(n));
  for (Index x = 0; x < n; ++x) {
    const double v = 255.0 * (1.0 - u.values.row(x).maxCoeff());
    uncertainty[x] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
  }
  const double online_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return json_response(200, {{"dims", s->image.dims.extents},
                             {"labels", {{"encoding", "rle"}, {"runs", run_length(labels.labels)}}},
                             {"uncertainty", {{"encoding", "base64-u8"}, {"data", base64(uncertainty)}}},
                             {"m_use", rep.m_use},
                             {"adaptive_passed", passed},
                             {"online_ms", online_ms},
                             {"refreshed", s->refreshed != nullptr},
                             {"beta", s->beta},
                             {"base_beta", s->base().beta},
                             {"max_row_deviation", rep.pre_normalization_deviation}});
}

struct HttpService::Impl {
  SessionStore& store;
  httplib::Server server;
};

HttpService::HttpService(SessionStore& store) : impl_(new Impl{store, {}}) {
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    const HttpResponse r = impl_->store.handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  const std::string pattern = R"(/sessions(/.*)?)";
  impl_->server.Get(pattern, dispatch);
  impl_->server.Post(pattern, dispatch);
  impl_->server.Put(pattern, dispatch);
  impl_->server.Delete(pattern, dispatch);
  impl_->server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpService::serve() { return impl_->server.listen_after_bind(); }

void HttpService::stop() { impl_->server.stop(); }

}  // namespace rwfast
