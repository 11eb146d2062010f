#include "hazeval/annotation.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>
#include <set>

#include "hazeval/agreement.hpp"
#include "hazeval/rng.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string make_task_id(std::string_view question_id, std::string_view annotator_id) {
  return std::string(question_id) + "~" + std::string(annotator_id);
}

std::vector<AnnotationTask> assign_tasks(const std::vector<std::string>& question_ids,
                                         const std::vector<std::string>& annotator_ids, std::size_t redundancy,
                                         std::uint64_t seed) {
  if (question_ids.empty()) throw PreconditionError("assign_tasks: no questions");
  if (annotator_ids.empty()) throw PreconditionError("assign_tasks: no annotators");
  if (redundancy == 0) throw PreconditionError("assign_tasks: redundancy must be >= 1");
  if (redundancy > annotator_ids.size()) {
    throw PreconditionError("assign_tasks: redundancy " + std::to_string(redundancy) + " exceeds " +
                            std::to_string(annotator_ids.size()) + " annotators");
  }
  if (std::set<std::string>(question_ids.begin(), question_ids.end()).size() != question_ids.size()) {
    throw PreconditionError("assign_tasks: duplicate question id");
  }
  if (std::set<std::string>(annotator_ids.begin(), annotator_ids.end()).size() != annotator_ids.size()) {
    throw PreconditionError("assign_tasks: duplicate annotator id");
  }

  std::vector<std::string> order = annotator_ids;
  Rng rng(seed);
  shuffle(rng, order);
  std::vector<AnnotationTask> tasks;
  tasks.reserve(question_ids.size() * redundancy);
  for (std::size_t j = 0; j < question_ids.size(); ++j) {
    for (std::size_t r = 0; r < redundancy; ++r) {
      const std::string& a = order[(j * redundancy + r) % order.size()];
      tasks.push_back({make_task_id(question_ids[j], a), question_ids[j], a});
    }
  }
  return tasks;
}

bool HumanAnnotation::same_labels(const HumanAnnotation& o) const {
  return task_id == o.task_id && specificity == o.specificity && relevance == o.relevance &&
         documents_used == o.documents_used && context_overall == o.context_overall && confidence == o.confidence &&
         comment == o.comment;
}

ordered_json to_json(const HumanAnnotation& a) {
  ordered_json j;
  j["task_id"] = a.task_id;
  ordered_json spec;
  for (Dimension d : kAllDimensions) spec[std::string(to_string(d))] = a.specificity[static_cast<std::size_t>(d)];
  j["specificity"] = std::move(spec);
  j["relevance"] = a.relevance;
  j["context_used"] = {{"documents", a.documents_used}, {"overall", a.context_overall}};
  j["confidence"] = a.confidence;
  j["comment"] = a.comment ? ordered_json(*a.comment) : ordered_json(nullptr);
  j["submitted_at"] = a.submitted_at;
  return j;
}

ordered_json to_json(const std::vector<FieldError>& errors) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : errors) arr.push_back({{"field", e.field}, {"message", e.message}});
  return arr;
}

namespace {

void scale(const json& body, const char* key, const std::string& field, int& out, std::vector<FieldError>& errors) {
  if (!body.contains(key)) {
    errors.push_back({field, "is required"});
    return;
  }
  const json& v = body[key];
  if (!v.is_number_integer()) {
    errors.push_back({field, "must be an integer from 1 to 10"});
    return;
  }
  const auto n = v.get<std::int64_t>();
  if (n < 1 || n > 10) {
    errors.push_back({field, "must be between 1 and 10, got " + std::to_string(n)});
    return;
  }
  out = static_cast<int>(n);
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, const std::string& prefix,
                    std::vector<FieldError>& errors) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || k == key;
    if (!ok) errors.push_back({prefix + key, "is not a recognised field"});
  }
}

}  // namespace

AnnotationParse validate_annotation(const json& body, std::string_view task_id) {
  AnnotationParse out;
  auto& errors = out.errors;
  if (!body.is_object()) {
    errors.push_back({"", "body must be a JSON object"});
    return out;
  }
  reject_unknown(body, {"task_id", "specificity", "relevance", "context_used", "confidence", "comment", "submitted_at"},
                 "", errors);

  HumanAnnotation a;
  a.task_id = std::string(task_id);
  if (body.contains("task_id") && !(body["task_id"].is_string() && body["task_id"].get<std::string>() == task_id)) {
    errors.push_back({"task_id", "does not match the task in the URL"});
  }

  if (!body.contains("specificity") || !body["specificity"].is_object()) {
    errors.push_back({"specificity", "must be an object with hazard, location, timeline and intensity"});
  } else {
    const json& spec = body["specificity"];
    reject_unknown(spec, {"hazard", "location", "timeline", "intensity"}, "specificity.", errors);
    for (Dimension d : kAllDimensions) {
      const std::string key(to_string(d));
      const std::string field = "specificity." + key;
      if (!spec.contains(key)) {
        errors.push_back({field, "is required"});
        continue;
      }
      if (!spec[key].is_string()) {
        errors.push_back({field, "must be one of yes, no, na"});
        continue;
      }
      const std::string v = to_lower(spec[key].get<std::string>());
      if (v == "yes" || v == "no" || v == "na") {
        a.specificity[static_cast<std::size_t>(d)] = v;
      } else if (v == "n/a") {
        a.specificity[static_cast<std::size_t>(d)] = "na";
      } else {
        errors.push_back({field, "must be one of yes, no, na"});
      }
    }
  }

  scale(body, "relevance", "relevance", a.relevance, errors);
  scale(body, "confidence", "confidence", a.confidence, errors);

  if (!body.contains("context_used") || !body["context_used"].is_object()) {
    errors.push_back({"context_used", "must be an object with documents and overall"});
  } else {
    const json& cu = body["context_used"];
    reject_unknown(cu, {"documents", "overall"}, "context_used.", errors);
    const json docs = cu.value("documents", json());
    if (!docs.is_array() || docs.size() != kSourcesPerTask) {
      errors.push_back({"context_used.documents", "must be an array of " + std::to_string(kSourcesPerTask) + " booleans"});
    } else {
      for (std::size_t i = 0; i < kSourcesPerTask; ++i) {
        if (!docs[i].is_boolean()) {
          errors.push_back({"context_used.documents[" + std::to_string(i) + "]", "must be a boolean"});
        } else {
          a.documents_used[i] = docs[i].get<bool>();
        }
      }
    }
    scale(cu, "overall", "context_used.overall", a.context_overall, errors);
  }

  if (body.contains("comment") && !body["comment"].is_null()) {
    if (!body["comment"].is_string()) {
      errors.push_back({"comment", "must be a string or null"});
    } else if (!trim(body["comment"].get<std::string>()).empty()) {
      a.comment = body["comment"].get<std::string>();
    }
  }

  if (errors.empty()) out.annotation = std::move(a);
  return out;
}

std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

AnnotationStore::AnnotationStore(fs::path log_path, std::vector<AnnotationTask> tasks, Clock clock)
    : log_path_(std::move(log_path)), tasks_(std::move(tasks)), clock_(std::move(clock)) {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (!task_index_.emplace(tasks_[i].task_id, i).second) {
      throw ConfigError("duplicate task id '" + tasks_[i].task_id + "'");
    }
  }
  replay();
}

void AnnotationStore::replay() {
  if (!fs::exists(log_path_)) return;
  std::ifstream in(log_path_, std::ios::binary);
  if (!in) throw Error("cannot read annotation log " + log_path_.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) {
      // A record without its newline was cut short by a crash mid-write and
      // was never acknowledged. Drop it so later appends start clean.
      fs::resize_file(log_path_, pos);
      break;
    }
    ++line_no;
    const std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    if (trim(line).empty()) continue;
    const json rec = json::parse(line, nullptr, false);
    const std::string where = log_path_.string() + ":" + std::to_string(line_no);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("annotation") || !rec.contains("task_id")) {
      throw ConfigError("corrupt annotation log record at " + where);
    }
    const std::string task_id = rec["task_id"].get<std::string>();
    if (task_index_.find(task_id) == task_index_.end()) {
      throw ConfigError("annotation log names unknown task '" + task_id + "' at " + where);
    }
    auto parsed = validate_annotation(rec["annotation"], task_id);
    if (!parsed.annotation) throw ConfigError("invalid annotation in log at " + where);
    parsed.annotation->submitted_at = rec["annotation"].value("submitted_at", "");
    apply(*parsed.annotation);
    ++records_;
  }
}

void AnnotationStore::apply(const HumanAnnotation& a) { versions_[a.task_id].push_back(a); }

void AnnotationStore::append(const std::string& line) {
  if (log_path_.has_parent_path()) fs::create_directories(log_path_.parent_path());
  const int fd = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("cannot open annotation log " + log_path_.string() + ": " + std::strerror(errno));
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error("annotation log write failed: " + std::string(std::strerror(err)));
    }
    written += static_cast<std::size_t>(n);
  }
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (!synced) throw Error("annotation log fsync failed");
}

AnnotationStore::Ack AnnotationStore::submit(HumanAnnotation annotation) {
  const AnnotationTask* task = find_task(annotation.task_id);
  if (task == nullptr) throw NotFoundError("unknown task '" + annotation.task_id + "'");

  std::lock_guard write_lock(write_mutex_);
  {
    std::shared_lock read(view_mutex_);
    const auto it = versions_.find(annotation.task_id);
    if (it != versions_.end() && it->second.back().same_labels(annotation)) {
      return {Outcome::unchanged, it->second.size(), it->second.back()};
    }
  }
  annotation.submitted_at = clock_();
  ordered_json rec;
  rec["task_id"] = annotation.task_id;
  rec["annotator_id"] = task->annotator_id;
  rec["annotation"] = to_json(annotation);
  append(rec.dump() + "\n");
  if (after_append_) after_append_();

  std::unique_lock view(view_mutex_);
  apply(annotation);
  ++records_;
  return {Outcome::stored, versions_[annotation.task_id].size(), annotation};
}

const AnnotationTask* AnnotationStore::find_task(std::string_view task_id) const {
  const auto it = task_index_.find(task_id);
  return it == task_index_.end() ? nullptr : &tasks_[it->second];
}

bool AnnotationStore::done(std::string_view task_id) const { return current(task_id).has_value(); }

std::optional<HumanAnnotation> AnnotationStore::current(std::string_view task_id) const {
  std::shared_lock read(view_mutex_);
  const auto it = versions_.find(task_id);
  if (it == versions_.end()) return std::nullopt;
  return it->second.back();
}

std::vector<HumanAnnotation> AnnotationStore::history(std::string_view task_id) const {
  std::shared_lock read(view_mutex_);
  const auto it = versions_.find(task_id);
  return it == versions_.end() ? std::vector<HumanAnnotation>{} : it->second;
}

std::vector<HumanAnnotation> AnnotationStore::snapshot() const {
  std::shared_lock read(view_mutex_);
  std::vector<HumanAnnotation> out;
  for (const auto& t : tasks_) {
    const auto it = versions_.find(t.task_id);
    if (it != versions_.end()) out.push_back(it->second.back());
  }
  return out;
}

std::size_t AnnotationStore::log_records() const {
  std::shared_lock read(view_mutex_);
  return records_;
}

void AnnotationStore::set_after_append_hook(std::function<void()> hook) {
  std::lock_guard write_lock(write_mutex_);
  after_append_ = std::move(hook);
}

AutomatedScores automated_from_row(const json& row) {
  AutomatedScores s;
  auto number = [](const json& obj, const char* key) -> std::optional<double> {
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_number()) return std::nullopt;
    return obj[key].get<double>();
  };
  if (row.contains("specificity") && row["specificity"].is_object()) {
    s.has_specificity = true;
    for (Dimension d : kAllDimensions) {
      s.specificity_averages[static_cast<std::size_t>(d)] = number(row["specificity"], std::string(to_string(d)).c_str());
    }
  }
  if (row.contains("relevance")) s.relevance = number(row["relevance"], "relevance");
  if (row.contains("context_utilization")) s.cu = number(row["context_utilization"], "cu");
  return s;
}

std::map<std::string, AutomatedScores> read_automated_rows(const fs::path& rows_jsonl) {
  std::ifstream in(rows_jsonl);
  if (!in) throw ConfigError("cannot open rows file " + rows_jsonl.string());
  std::map<std::string, AutomatedScores> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const json row = json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.contains("id")) throw ConfigError("malformed row in " + rows_jsonl.string());
    out[row["id"].get<std::string>()] = automated_from_row(row);
  }
  return out;
}

std::string automated_label(const std::optional<double>& avg) {
  if (!avg) return "na";
  return *avg >= 0.5 ? "yes" : "no";
}

namespace {

const std::vector<std::string> kLabelCategories = {"yes", "no", "na"};

ordered_json correlation_json(const std::vector<double>& x, const std::vector<double>& y) {
  const Correlation c = spearman(x, y);
  ordered_json j;
  j["n"] = x.size();
  j["spearman"] = c.rho ? ordered_json(*c.rho) : ordered_json(nullptr);
  j["p_value"] = c.p_value ? ordered_json(*c.p_value) : ordered_json(nullptr);
  return j;
}

ordered_json match_json(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == b[i] ? 1 : 0;
  ordered_json j;
  j["agree"] = agree;
  j["disagree"] = a.size() - agree;
  j["agree_percent"] = 100.0 * percent_agreement(a, b);
  return j;
}

}  // namespace

ordered_json agreement_report(const std::vector<AnnotationTask>& tasks, const std::vector<HumanAnnotation>& annotations,
                              const std::vector<AutomatedSource>& automated) {
  std::map<std::string, const HumanAnnotation*> by_task;
  for (const auto& a : annotations) by_task[a.task_id] = &a;

  // question -> annotations ordered by annotator id
  std::map<std::string, std::map<std::string, const HumanAnnotation*>> by_question;
  for (const auto& t : tasks) {
    const auto it = by_task.find(t.task_id);
    if (it != by_task.end()) by_question[t.question_id][t.annotator_id] = it->second;
  }
  std::vector<std::pair<const HumanAnnotation*, const HumanAnnotation*>> pairs;
  for (const auto& [qid, per_annotator] : by_question) {
    if (per_annotator.size() < 2) continue;
    auto it = per_annotator.begin();
    const HumanAnnotation* first = it->second;
    pairs.emplace_back(first, std::next(it)->second);
  }
  if (pairs.empty()) throw PreconditionError("agreement needs at least one doubly annotated question");

  ordered_json report;
  report["doubly_annotated_questions"] = pairs.size();
  report["annotations"] = annotations.size();

  ordered_json hh;
  ordered_json spec;
  for (Dimension d : kAllDimensions) {
    const auto k = static_cast<std::size_t>(d);
    std::vector<std::string> a;
    std::vector<std::string> b;
    std::vector<std::vector<std::string>> items;
    for (const auto& [x, y] : pairs) {
      a.push_back(x->specificity[k]);
      b.push_back(y->specificity[k]);
      items.push_back({x->specificity[k], y->specificity[k]});
    }
    ordered_json row = match_json(a, b);
    std::optional<double> kappa;
    if (items.size() >= 2) kappa = fleiss_kappa(rating_matrix(items, kLabelCategories));
    row["fleiss_kappa"] = kappa ? ordered_json(*kappa) : ordered_json(nullptr);
    spec[std::string(to_string(d))] = std::move(row);
  }
  hh["specificity"] = std::move(spec);
  if (pairs.size() >= 3) {
    std::vector<double> ra, rb, ca, cb;
    for (const auto& [x, y] : pairs) {
      ra.push_back(x->relevance);
      rb.push_back(y->relevance);
      ca.push_back(x->context_overall);
      cb.push_back(y->context_overall);
    }
    hh["relevance"] = correlation_json(ra, rb);
    hh["context_utilization"] = correlation_json(ca, cb);
  }
  report["human_human"] = std::move(hh);

  std::map<std::string, std::string> question_of;
  for (const auto& t : tasks) question_of[t.task_id] = t.question_id;

  ordered_json ha = ordered_json::object();
  for (const auto& src : automated) {
    ordered_json block;
    std::vector<const HumanAnnotation*> rows;
    std::vector<const AutomatedScores*> autos;
    for (const auto& a : annotations) {
      const auto q = question_of.find(a.task_id);
      if (q == question_of.end()) continue;
      const auto it = src.rows.find(q->second);
      if (it == src.rows.end()) continue;
      rows.push_back(&a);
      autos.push_back(&it->second);
    }
    if (rows.empty()) continue;
    block["rows"] = rows.size();
    ordered_json sp = ordered_json::object();
    for (Dimension d : kAllDimensions) {
      const auto k = static_cast<std::size_t>(d);
      std::vector<std::string> human;
      std::vector<std::string> model;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!autos[i]->has_specificity) continue;
        human.push_back(rows[i]->specificity[k]);
        model.push_back(automated_label(autos[i]->specificity_averages[k]));
      }
      if (!human.empty()) sp[std::string(to_string(d))] = match_json(human, model);
    }
    if (!sp.empty()) block["specificity"] = std::move(sp);
    std::vector<double> hr, mr, hc, mc;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (autos[i]->relevance) {
        hr.push_back(rows[i]->relevance);
        mr.push_back(*autos[i]->relevance);
      }
      if (autos[i]->cu) {
        hc.push_back(rows[i]->context_overall);
        mc.push_back(*autos[i]->cu);
      }
    }
    if (hr.size() >= 3) block["relevance"] = correlation_json(hr, mr);
    if (hc.size() >= 3) block["context_utilization"] = correlation_json(hc, mc);
    ha[src.name] = std::move(block);
  }
  if (!ha.empty()) report["human_automated"] = std::move(ha);
  return report;
}

}  // namespace hazeval
