#include "offcut/service.hpp"

#include <httplib.h>

#include <charconv>
#include <cmath>
#include <sstream>

#include "offcut/error.hpp"

namespace offcut {
namespace {

HttpResponse json_response(int status, const Json& j) { return {status, dump_canonical(j), "application/json"}; }

HttpResponse error_response(int status, const std::string& message, const std::string& path = "") {
  Json j;
  j["error"] = message;
  if (!path.empty()) j["path"] = path;
  return json_response(status, j);
}

/// Request body problems map to 422.
struct BadRequest : Error {
  BadRequest(std::string path, const std::string& what) : Error(what), path(std::move(path)) {}
  std::string path;
};

Json parse_body(const std::string& body) {
  if (body.empty()) return Json::object();
  try {
    Json j = Json::parse(body);
    if (!j.is_object()) throw BadRequest("$", "expected a JSON object");
    return j;
  } catch (const Json::parse_error& e) {
    throw BadRequest("$", std::string("invalid JSON: ") + e.what());
  }
}

void allow_only(const Json& j, std::initializer_list<const char*> keys) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
      throw BadRequest("$." + key, "unknown field");
    }
  }
}

template <class T>
T get_as(const Json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const Json::exception&) {
    throw BadRequest(path, "wrong type");
  }
}

std::optional<std::size_t> parse_index(const std::string& s) {
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::stringstream ss(path);
  std::string seg;
  while (std::getline(ss, seg, '/')) {
    if (!seg.empty()) out.push_back(seg);
  }
  return out;
}

Json violations_json(const EffectivenessVerdict& verdict) {
  Json out = Json::array();
  for (const Violation& v : verdict.violations) {
    Json j;
    j["kind"] = to_string(v.kind);
    j["parts"] = v.parts;
    j["magnitude"] = std::isfinite(v.magnitude) ? Json(v.magnitude) : Json(nullptr);
    j["axis"] = v.axis;
    j["side"] = v.side;
    out.push_back(std::move(j));
  }
  return out;
}

Json violated_rows_json(const ConstraintSystem& system, const std::vector<double>& x) {
  Json out = Json::array();
  for (std::size_t i = 0; i < system.row_count(); ++i) {
    const ConstraintRow& row = system.row(i);
    const double r = row.evaluate(x) - row.target;
    if (std::abs(r) < kResidualTolerance) continue;
    out.push_back({{"row", i}, {"kind", to_string(row.kind)}, {"residual", r}});
  }
  return out;
}

Layout current_layout(const Session& s, SearchContext& ctx) {
  if (!s.placements.empty()) {
    if (auto l = ctx.rebuild(s.x, s.placements)) return *l;
  }
  return ctx.dock(s.x, identity_ordering(ctx.evaluator().part_count()));
}

// Adopts a new configuration and forgets the placements of the old one.
void adopt(Session& s, const DesignParams& x, std::vector<PlacementRecord> placements = {}) {
  s.doc = with_parameters(s.doc, x);
  s.x = s.doc.initial();
  s.placements = std::move(placements);
}

}  // namespace

const char* to_string(RunState s) {
  switch (s) {
    case RunState::Idle: return "idle";
    case RunState::Running: return "running";
    case RunState::Done: return "done";
    case RunState::Cancelled: return "cancelled";
    case RunState::Failed: return "failed";
  }
  return "?";
}

Service::~Service() {
  std::lock_guard lock(mutex_);
  for (auto& [id, s] : sessions_) s->cancel = true;
  for (auto& [id, s] : sessions_) {
    if (s->runner.joinable()) s->runner.join();
  }
}

std::shared_ptr<Session> Service::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void Service::wait(const std::string& id) {
  auto s = find(id);
  if (!s) return;
  while (true) {
    {
      std::lock_guard lock(s->mutex);
      if (s->state != RunState::Running) return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body,
                             const std::map<std::string, std::string>& query) {
  const std::vector<std::string> seg = split_path(path);
  try {
    if (seg.empty() || seg[0] != "sessions") return error_response(404, "not found");
    if (seg.size() == 1) {
      if (method != "POST") return error_response(405, "method not allowed");
      return create(body);
    }
    auto s = find(seg[1]);
    if (!s) return error_response(404, "unknown session " + seg[1]);
    const std::string route = seg.size() > 2 ? seg[2] : "";
    if (seg.size() == 3) {
      if (route == "optimize" && method == "POST") return optimize(s, body);
      if (route == "optimize" && method == "DELETE") return cancel(*s);
      if (method == "GET") {
        if (route == "design") return design(*s);
        if (route == "status") return status(*s);
        if (route == "suggestions") return suggestions(*s);
        if (route == "layout") return layout(*s);
        if (route == "plan.svg") return plan(*s, query);
        if (route == "diagnostics") return diagnostics(*s);
      }
      if (method == "POST") {
        if (route == "select") return select(*s, body);
        if (route == "lock") return lock(*s, body);
        if (route == "edit") return edit(*s, body);
      }
    }
    if (seg.size() == 6 && route == "suggestions" && seg[4] == "path" && method == "GET") {
      return path_snapshot(*s, seg[3], seg[5]);
    }
    return error_response(404, "not found");
  } catch (const SchemaError& e) {
    return error_response(422, e.what(), e.path());
  } catch (const BadRequest& e) {
    return error_response(422, e.what(), e.path);
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse Service::create(const std::string& body) {
  DesignDocument doc = load_design(body);
  const Problem problem = doc.problem();
  SearchContext ctx(problem);
  auto s = std::make_shared<Session>();
  s->doc = std::move(doc);
  s->x = s->doc.initial();
  {
    std::lock_guard lock(mutex_);
    s->id = "s" + std::to_string(next_id_++);
    sessions_[s->id] = s;
  }
  return json_response(201, {{"id", s->id}});
}

HttpResponse Service::design(Session& s) {
  std::lock_guard lock(s.mutex);
  return {200, save_design(s.doc), "application/json"};
}

HttpResponse Service::optimize(const std::shared_ptr<Session>& sp, const std::string& body) {
  Session& s = *sp;
  const Json j = parse_body(body);
  allow_only(j, {"seed", "generations", "keep", "improve_iterations", "orderings", "workers", "raster_res", "boards"});
  std::lock_guard lock(s.mutex);
  if (s.state == RunState::Running) return error_response(409, "an optimization is already running");

  SearchConfig config;
  if (j.contains("seed")) config.seed = get_as<std::uint64_t>(j["seed"], "$.seed");
  if (j.contains("generations")) config.generations = get_as<int>(j["generations"], "$.generations");
  if (j.contains("keep")) config.keep = get_as<std::size_t>(j["keep"], "$.keep");
  if (j.contains("improve_iterations")) {
    config.improve_iterations = get_as<int>(j["improve_iterations"], "$.improve_iterations");
  }
  if (j.contains("orderings")) config.orderings = get_as<std::size_t>(j["orderings"], "$.orderings");
  if (j.contains("workers")) config.workers = get_as<int>(j["workers"], "$.workers");
  if (config.generations < 0 || config.keep < 1 || config.workers < 1 || config.orderings < 1) {
    throw BadRequest("$", "generations, keep, orderings and workers must be positive");
  }
  if (j.contains("raster_res")) {
    const double res = get_as<double>(j["raster_res"], "$.raster_res");
    if (!(res > 0.0)) throw BadRequest("$.raster_res", "must be positive");
    s.doc.raster_res = res;
  }
  if (j.contains("boards")) {
    std::vector<BoardSpec> boards;
    const Json& b = j["boards"];
    if (!b.is_array() || b.empty()) throw BadRequest("$.boards", "expected a non-empty array");
    for (std::size_t i = 0; i < b.size(); ++i) {
      const std::string p = "$.boards[" + std::to_string(i) + "]";
      if (!b[i].is_object() || !b[i].contains("width") || !b[i].contains("height")) {
        throw BadRequest(p, "expected {width, height}");
      }
      const BoardSpec spec{get_as<double>(b[i]["width"], p + ".width"), get_as<double>(b[i]["height"], p + ".height")};
      if (!(spec.width > 0.0 && spec.height > 0.0)) throw BadRequest(p, "dimensions must be positive");
      boards.push_back(spec);
    }
    s.doc.boards = std::move(boards);
  }

  if (s.runner.joinable()) s.runner.join();
  s.config = config;
  s.result = {};
  s.suggestions.clear();
  s.error.clear();
  s.cancel = false;
  s.state = RunState::Running;
  s.progress = {0, config.generations};
  Session* session = &s;
  s.runner = std::jthread([session, problem = s.doc.problem(), start = s.x, config] {
    try {
      SearchResult r = min_wastage(
          problem, start, config,
          [session](const SearchProgress& p) {
            std::lock_guard lock(session->mutex);
            session->progress = p;
          },
          &session->cancel);
      std::vector<std::size_t> picks;
      if (!r.results.empty()) picks = select_suggestions(r.results, *problem.evaluator);
      std::lock_guard lock(session->mutex);
      session->state = r.cancelled ? RunState::Cancelled : RunState::Done;
      session->result = std::move(r);
      session->suggestions = std::move(picks);
    } catch (const std::exception& e) {
      std::lock_guard lock(session->mutex);
      session->state = RunState::Failed;
      session->error = e.what();
    }
  });
  return json_response(202, {{"state", "running"}});
}

HttpResponse Service::cancel(Session& s) {
  std::lock_guard lock(s.mutex);
  if (s.state != RunState::Running) return error_response(409, "no optimization is running");
  s.cancel = true;
  return json_response(202, {{"state", "cancelling"}});
}

HttpResponse Service::status(Session& s) {
  std::lock_guard lock(s.mutex);
  Json j;
  j["state"] = to_string(s.state);
  j["generation"] = s.progress.generation;
  j["generations"] = s.progress.generations;
  j["progress"] = s.progress.generations > 0 ? static_cast<double>(s.progress.generation) / s.progress.generations
                                             : (s.state == RunState::Done ? 1.0 : 0.0);
  j["diagnostic"] = s.result.diagnostic;
  j["error"] = s.error;
  return json_response(200, j);
}

HttpResponse Service::suggestions(Session& s) {
  std::lock_guard lock(s.mutex);
  if (s.suggestions.empty()) return error_response(404, "no suggestions");
  const auto evaluator = s.doc.evaluator();
  Json list = Json::array();
  for (std::size_t k = 0; k < s.suggestions.size(); ++k) {
    const ExplorationResult& r = s.result.results[s.suggestions[k]];
    const std::vector<Part> parts = evaluator->evaluate(r.x);
    Json j;
    j["k"] = k;
    j["rank"] = s.suggestions[k];
    j["wastage"] = r.wastage;
    j["start_wastage"] = r.path.empty() ? r.wastage : r.path.front().wastage;
    j["path_length"] = r.path.size();
    j["parameters"] = r.x.values;
    j["layout"] = layout_json(r.layout, parts, s.doc.boards, s.doc.raster_res);
    list.push_back(std::move(j));
  }
  return json_response(200, {{"parameter_names", s.x.names}, {"suggestions", std::move(list)}});
}

HttpResponse Service::path_snapshot(Session& s, const std::string& ks, const std::string& ts) {
  std::lock_guard lock(s.mutex);
  const auto k = parse_index(ks);
  const auto t = parse_index(ts);
  if (!k || *k >= s.suggestions.size()) return error_response(404, "unknown suggestion " + ks);
  const ExplorationResult& r = s.result.results[s.suggestions[*k]];
  if (!t || *t >= r.path.size()) return error_response(404, "path index out of range");
  const Snapshot& snap = r.path[*t];
  const Problem problem = s.doc.problem();
  SearchContext ctx(problem);
  const std::vector<Part> parts = problem.evaluator->evaluate(snap.x);
  Json j = snapshot_json(snap, parts, s.doc.raster_res);
  j["t"] = *t;
  j["path_length"] = r.path.size();
  if (auto l = ctx.rebuild(snap.x, snap.placements)) j["layout"] = layout_json(*l, parts, s.doc.boards, s.doc.raster_res);
  return json_response(200, j);
}

HttpResponse Service::select(Session& s, const std::string& body) {
  const Json j = parse_body(body);
  allow_only(j, {"k", "t"});
  if (!j.contains("k")) throw BadRequest("$.k", "missing field");
  const auto k = get_as<std::size_t>(j["k"], "$.k");
  std::lock_guard lock(s.mutex);
  if (s.state == RunState::Running) return error_response(409, "an optimization is running");
  if (k >= s.suggestions.size()) return error_response(404, "unknown suggestion " + std::to_string(k));
  const ExplorationResult& r = s.result.results[s.suggestions[k]];
  if (j.contains("t")) {
    const auto t = get_as<std::size_t>(j["t"], "$.t");
    if (t >= r.path.size()) return error_response(404, "path index out of range");
    adopt(s, r.path[t].x, r.path[t].placements);
  } else {
    adopt(s, r.x, records(r.layout));
  }
  return {200, save_design(s.doc), "application/json"};
}

HttpResponse Service::lock(Session& s, const std::string& body) {
  const Json j = parse_body(body);
  allow_only(j, {"sizes"});
  if (!j.contains("sizes") || !j["sizes"].is_array()) throw BadRequest("$.sizes", "expected an array");
  std::lock_guard lock(s.mutex);
  if (s.state == RunState::Running) return error_response(409, "an optimization is running");
  const auto evaluator = s.doc.evaluator();
  const std::vector<Part> parts = evaluator->evaluate(s.x);
  std::vector<ConstraintRow> rows;
  for (std::size_t i = 0; i < j["sizes"].size(); ++i) {
    const Json& e = j["sizes"][i];
    const std::string p = "$.sizes[" + std::to_string(i) + "]";
    if (!e.is_object()) throw BadRequest(p, "expected an object");
    allow_only(e, {"part", "size", "value"});
    if (!e.contains("part") || !e.contains("size")) throw BadRequest(p, "needs part and size");
    const int id = get_as<int>(e["part"], p + ".part");
    const std::string size = get_as<std::string>(e["size"], p + ".size");
    if (size != "lx" && size != "ly") throw BadRequest(p + ".size", "expected lx or ly");
    auto it = std::find_if(parts.begin(), parts.end(), [&](const Part& q) { return q.id == id; });
    if (it == parts.end()) throw BadRequest(p + ".part", "unknown part id");
    const std::size_t index = static_cast<std::size_t>(it - parts.begin());
    const AffineForm form = evaluator->attribute(index, size == "lx" ? Attr::LX : Attr::LY);
    const double current = form(s.x.values);
    const double value = e.contains("value") ? get_as<double>(e["value"], p + ".value") : current;
    if (std::abs(value - current) > kResidualTolerance) {
      throw BadRequest(p + ".value", "lock is not satisfied by the current design");
    }
    ConstraintRow row = rows::affine(form, current, ConstraintKind::FixedLength);
    if (!row.terms.empty()) rows.push_back(std::move(row));
  }
  const ConstraintSystem existing = s.doc.constraint_system();
  std::size_t added = 0;
  for (ConstraintRow& row : rows) {
    if (existing.contains(row)) continue;
    s.doc.constraints.push_back(std::move(row));
    ++added;
  }
  s.locks += added;
  return json_response(200, {{"added", added}, {"constraints", s.doc.constraints.size()}});
}

HttpResponse Service::edit(Session& s, const std::string& body) {
  const Json j = parse_body(body);
  allow_only(j, {"u", "mode"});
  const std::string mode = j.contains("mode") ? get_as<std::string>(j["mode"], "$.mode") : "strict";
  if (mode != "strict" && mode != "flush" && mode != "override") {
    throw BadRequest("$.mode", "expected strict, flush or override");
  }
  std::lock_guard lock(s.mutex);
  if (s.state == RunState::Running) return error_response(409, "an optimization is running");
  const std::size_t n = s.x.size();
  std::vector<double> u(n, 0.0);
  if (!j.contains("u")) throw BadRequest("$.u", "missing field");
  const Json& ju = j["u"];
  if (ju.is_array()) {
    if (ju.size() != n) throw BadRequest("$.u", "expected " + std::to_string(n) + " entries");
    for (std::size_t i = 0; i < n; ++i) u[i] = get_as<double>(ju[i], "$.u[" + std::to_string(i) + "]");
  } else if (ju.is_object()) {
    for (const auto& [name, value] : ju.items()) {
      const std::size_t i = find_param(s.x, name);
      if (i == static_cast<std::size_t>(-1)) throw BadRequest("$.u." + name, "unknown parameter");
      u[i] = get_as<double>(value, "$.u." + name);
    }
  } else {
    throw BadRequest("$.u", "expected an array or an object");
  }

  const Problem problem = s.doc.problem();
  Json out;
  if (mode == "override") {
    std::vector<double> x = s.x.values;
    for (std::size_t i = 0; i < n; ++i) x[i] += u[i];
    const DesignParams next{x, s.x.names};
    EffectivenessVerdict verdict;
    try {
      verdict = check_effectiveness(x, *problem.evaluator, problem.effectiveness);
    } catch (const Error& e) {
      throw BadRequest("$.u", e.what());
    }
    adopt(s, next);
    out["status"] = "override";
    out["parameters"] = s.x.values;
    out["violated_rows"] = violated_rows_json(problem.constraints, x);
    out["violations"] = violations_json(verdict);
    return json_response(200, out);
  }

  const EffectivenessResult r =
      dynamic_effectiveness_constraints(*problem.evaluator, problem.constraints, problem.effectiveness, s.x, u);
  out["status"] = r.solved() ? "solved" : "failed";
  out["alpha"] = r.alpha;
  out["dynamic_rows"] = r.dynamic_rows.size();
  out["violated_rows"] = violated_rows_json(problem.constraints, r.point.values);
  out["violations"] = violations_json(r.verdict);
  if (!r.solved() && mode == "strict") {
    out["parameters"] = s.x.values;
    return json_response(409, out);
  }
  adopt(s, r.point);
  out["parameters"] = s.x.values;
  return json_response(200, out);
}

HttpResponse Service::layout(Session& s) {
  std::lock_guard lock(s.mutex);
  const Problem problem = s.doc.problem();
  SearchContext ctx(problem);
  const std::vector<Part> parts = problem.evaluator->evaluate(s.x);
  return json_response(200, layout_json(current_layout(s, ctx), parts, s.doc.boards, s.doc.raster_res));
}

HttpResponse Service::plan(Session& s, const std::map<std::string, std::string>& query) {
  std::lock_guard lock(s.mutex);
  std::size_t board = 0;
  if (auto it = query.find("board"); it != query.end()) {
    const auto b = parse_index(it->second);
    if (!b) return error_response(404, "unknown board");
    board = *b;
  }
  const Problem problem = s.doc.problem();
  SearchContext ctx(problem);
  const std::vector<Part> parts = problem.evaluator->evaluate(s.x);
  const auto svgs = export_svg(current_layout(s, ctx), parts, s.doc.boards, s.doc.raster_res);
  if (board >= svgs.size()) return error_response(404, "unknown board");
  return {200, svgs[board], "image/svg+xml"};
}

HttpResponse Service::diagnostics(Session& s) {
  std::lock_guard lock(s.mutex);
  const Problem problem = s.doc.problem();
  Json j;
  j["residual"] = residual(problem.constraints, s.x.values).norm();
  j["violated_rows"] = violated_rows_json(problem.constraints, s.x.values);
  j["violations"] = violations_json(check_effectiveness(s.x.values, *problem.evaluator, problem.effectiveness));
  if (problem.effectiveness.checks_sag()) {
    const std::vector<Part> parts = problem.evaluator->evaluate(s.x);
    FemOptions fem;
    fem.material = s.doc.material;
    fem.element_size = problem.effectiveness.element_size;
    for (const LoadSpec& l : *problem.effectiveness.loads) {
      auto it = std::find_if(parts.begin(), parts.end(), [&](const Part& q) { return q.id == l.part; });
      const double norm = l.direction.norm();
      fem.loads.push_back({static_cast<int>(it - parts.begin()), (l.force / norm) * l.direction});
    }
    Json planks = Json::array();
    try {
      for (const PlankSag& p : analyze_sag(parts, fem).planks) {
        planks.push_back({{"part", parts[static_cast<std::size_t>(p.part)].id},
                          {"sagging", p.sagging},
                          {"max_deflection", p.max_deflection}});
      }
      j["sag"] = {{"planks", std::move(planks)}};
    } catch (const Error& e) {
      j["sag"] = {{"error", e.what()}};
    }
  } else {
    j["sag"] = nullptr;
  }
  return json_response(200, j);
}

struct HttpServer::Impl {
  httplib::Server server;
  Service service;
};

HttpServer::HttpServer() : impl_(std::make_unique<Impl>()) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const HttpResponse r = impl_->service.handle(req.method, req.path, req.body, query);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Delete(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::run() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

Service& HttpServer::service() { return impl_->service; }

}  // namespace offcut
