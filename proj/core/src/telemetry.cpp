#include "emokin/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "emokin/errors.hpp"

namespace emokin {
namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

double parse_field(std::string_view tok, size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw MalformedRow("line " + std::to_string(line_no) + ": not a number: '" + std::string(tok) + "'");
    if (!std::isfinite(v))
        throw MalformedRow("line " + std::to_string(line_no) + ": non-finite value '" + std::string(tok) + "'");
    return v;
}

// Shared CSV scaffolding for both stream kinds. `cols` counts the numeric
// columns after t.
template <typename Row>
std::vector<Row> parse_rows(std::istream& in, const std::vector<std::string_view>& header, size_t cols,
                            Row (*make)(double, const double*)) {
    std::vector<Row> rows;
    std::string line;
    size_t line_no = 0;
    bool saw_header = false;
    double prev_t = 0.0;
    std::vector<double> vals(cols);
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = trim(line);
        if (sv.empty()) continue;
        auto fields = split_csv(sv);
        if (!saw_header) {
            if (fields.size() != header.size())
                throw MalformedRow("line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(header.size()) + " header columns, got " +
                                   std::to_string(fields.size()));
            for (size_t i = 0; i < fields.size(); ++i)
                if (fields[i] != header[i])
                    throw MalformedRow("line " + std::to_string(line_no) + ": bad header column '" +
                                       std::string(fields[i]) + "', expected '" + std::string(header[i]) + "'");
            saw_header = true;
            continue;
        }
        if (fields.size() != cols + 1)
            throw MalformedRow("line " + std::to_string(line_no) + ": expected " + std::to_string(cols + 1) +
                               " columns, got " + std::to_string(fields.size()));
        double t = parse_field(fields[0], line_no);
        for (size_t i = 0; i < cols; ++i) vals[i] = parse_field(fields[i + 1], line_no);
        if (!rows.empty() && !(t > prev_t))
            throw NonMonotonicTime("line " + std::to_string(line_no) + ": t=" + format_g9(t) +
                                   " does not increase past " + format_g9(prev_t));
        rows.push_back(make(t, vals.data()));
        prev_t = t;
    }
    if (rows.empty()) throw EmptyInput("no data rows");
    return rows;
}

void check_stream(const char* what, size_t n, auto&& t_at, auto&& finite_at) {
    if (n == 0) throw SchemaViolation(std::string(what) + ": empty stream");
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(t_at(i)) || !finite_at(i))
            throw SchemaViolation(std::string(what) + ": non-finite value at sample " + std::to_string(i));
        if (i > 0 && !(t_at(i) > t_at(i - 1)))
            throw SchemaViolation(std::string(what) + ": timestamps not strictly increasing at sample " +
                                  std::to_string(i));
    }
}

std::string label_token(const std::optional<Emotion>& label) {
    return label ? std::string(to_string(*label)) : std::string("unlabeled");
}

}  // namespace

// ---------------------------------------------------------------------------
// Enums
// ---------------------------------------------------------------------------

int valence_sign(Emotion e) {
    switch (e) {
        case Emotion::Joy:
        case Emotion::Pleasure: return +1;
        case Emotion::Sadness:
        case Emotion::Annoyance: return -1;
        case Emotion::Neutral: return 0;
    }
    throw SchemaViolation("unknown emotion value");
}

int arousal_sign(Emotion e) {
    switch (e) {
        case Emotion::Joy:
        case Emotion::Annoyance: return +1;
        case Emotion::Pleasure:
        case Emotion::Sadness: return -1;
        case Emotion::Neutral: return 0;
    }
    throw SchemaViolation("unknown emotion value");
}

std::string_view to_string(Emotion e) {
    switch (e) {
        case Emotion::Joy: return "joy";
        case Emotion::Pleasure: return "pleasure";
        case Emotion::Sadness: return "sadness";
        case Emotion::Annoyance: return "annoyance";
        case Emotion::Neutral: return "neutral";
    }
    return "?";
}

std::optional<Emotion> emotion_from_string(std::string_view s) {
    for (Emotion e : kAllEmotions)
        if (s == to_string(e)) return e;
    return std::nullopt;
}

std::string_view to_string(TaskName n) {
    switch (n) {
        case TaskName::Lw: return "lw";
        case TaskName::Star: return "star";
        case TaskName::Stir: return "stir";
        case TaskName::S: return "s";
        case TaskName::Triangle: return "triangle";
        case TaskName::Drink: return "drink";
        case TaskName::Knock: return "knock";
        case TaskName::Throw: return "throw";
        case TaskName::Wave: return "wave";
    }
    return "?";
}

std::string_view to_string(TaskCategory c) {
    return c == TaskCategory::MidAir ? "air" : "trace";
}

std::string to_string(TaskKind k) {
    return std::string(to_string(k.name)) + "_" + std::string(to_string(k.category));
}

bool TaskKind::valid() const {
    if (category == TaskCategory::MidAir) return true;
    switch (name) {
        case TaskName::Lw:
        case TaskName::Star:
        case TaskName::Stir:
        case TaskName::S:
        case TaskName::Triangle: return true;
        default: return false;
    }
}

std::vector<TaskKind> all_task_kinds() {
    std::vector<TaskKind> out;
    for (int c = 0; c < 2; ++c)
        for (int n = 0; n < 9; ++n) {
            TaskKind k{static_cast<TaskName>(n), static_cast<TaskCategory>(c)};
            if (k.valid()) out.push_back(k);
        }
    return out;
}

std::optional<TaskKind> task_from_string(std::string_view s) {
    for (TaskKind k : all_task_kinds())
        if (s == to_string(k)) return k;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

void EndEffectorStream::validate() const {
    check_stream(
        "end-effector stream", samples.size(), [&](size_t i) { return samples[i].t; },
        [&](size_t i) { return samples[i].p.allFinite(); });
}

void JointStream::validate() const {
    check_stream(
        "joint stream", samples.size(), [&](size_t i) { return samples[i].t; },
        [&](size_t i) { return samples[i].q.allFinite(); });
}

void TaskInstance::validate() const {
    if (!task.valid()) throw SchemaViolation("invalid task kind: line tracing undefined for " +
                                             std::string(to_string(task.name)));
    if (repetition < 0) throw SchemaViolation("negative repetition index");
    ee.validate();
    joints.validate();
    if (ee.samples.size() < 8)
        throw SchemaViolation("instance needs at least 8 end-effector samples, got " +
                              std::to_string(ee.samples.size()));
    double dt = ee.duration() / double(ee.samples.size() - 1);
    if (std::abs(ee.samples.front().t - joints.samples.front().t) > dt ||
        std::abs(ee.samples.back().t - joints.samples.back().t) > dt)
        throw SchemaViolation("end-effector and joint streams cover different time intervals");
}

Dataset Dataset::from_instances(std::vector<TaskInstance> list) {
    Dataset ds;
    ds.instances = std::move(list);
    for (const auto& inst : ds.instances) {
        inst.validate();
        ++ds.manifest[ManifestKey{inst.subject_id, inst.task, inst.label}];
    }
    return ds;
}

void Dataset::validate() const {
    std::map<ManifestKey, int> counts;
    for (const auto& inst : instances) {
        inst.validate();
        ++counts[ManifestKey{inst.subject_id, inst.task, inst.label}];
    }
    if (counts != manifest) throw SchemaViolation("manifest counts disagree with instances");
}

// ---------------------------------------------------------------------------
// Parsing and formatting
// ---------------------------------------------------------------------------

EndEffectorStream parse_ee_stream(std::istream& in) {
    auto make = +[](double t, const double* v) { return EeSample{t, Eigen::Vector3d(v[0], v[1], v[2])}; };
    return EndEffectorStream{parse_rows<EeSample>(in, {"t", "x", "y", "z"}, 3, make)};
}

EndEffectorStream parse_ee_stream(const std::string& text) {
    std::istringstream in(text);
    return parse_ee_stream(in);
}

JointStream parse_joint_stream(std::istream& in) {
    auto make = +[](double t, const double* v) {
        JointSample s;
        s.t = t;
        for (int i = 0; i < 6; ++i) s.q[i] = v[i];
        return s;
    };
    return JointStream{parse_rows<JointSample>(in, {"t", "q1", "q2", "q3", "q4", "q5", "q6"}, 6, make)};
}

JointStream parse_joint_stream(const std::string& text) {
    std::istringstream in(text);
    return parse_joint_stream(in);
}

std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_ee_csv(const EndEffectorStream& s, std::ostream& out) {
    out << "t,x,y,z\n";
    for (const auto& smp : s.samples)
        out << format_g9(smp.t) << ',' << format_g9(smp.p.x()) << ',' << format_g9(smp.p.y()) << ','
            << format_g9(smp.p.z()) << '\n';
}

void write_joint_csv(const JointStream& s, std::ostream& out) {
    out << "t,q1,q2,q3,q4,q5,q6\n";
    for (const auto& smp : s.samples) {
        out << format_g9(smp.t);
        for (int i = 0; i < 6; ++i) out << ',' << format_g9(smp.q[i]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Dataset I/O
// ---------------------------------------------------------------------------

namespace {

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoFailure("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoFailure("read failed for " + path.string());
    return ss.str();
}

}  // namespace

std::filesystem::path write_instance(const TaskInstance& instance, const std::filesystem::path& dir) {
    instance.validate();
    std::filesystem::path inst_dir = dir / instance.subject_id / to_string(instance.task);
    std::error_code ec;
    std::filesystem::create_directories(inst_dir, ec);
    if (ec) throw IoFailure("cannot create " + inst_dir.string() + ": " + ec.message());

    std::string stem = label_token(instance.label) + "_" + std::to_string(instance.repetition);
    std::ostringstream ee_csv, joint_csv;
    write_ee_csv(instance.ee, ee_csv);
    write_joint_csv(instance.joints, joint_csv);
    write_text_file(inst_dir / (stem + "_ee.csv"), ee_csv.str());
    write_text_file(inst_dir / (stem + "_joints.csv"), joint_csv.str());

    json meta;
    meta["subject"] = instance.subject_id;
    meta["task"] = std::string(to_string(instance.task.name));
    meta["category"] = std::string(to_string(instance.task.category));
    if (instance.label)
        meta["label"] = std::string(to_string(*instance.label));
    else
        meta["label"] = nullptr;
    meta["repetition"] = instance.repetition;
    meta["ee_file"] = stem + "_ee.csv";
    meta["joints_file"] = stem + "_joints.csv";

    std::filesystem::path meta_path = inst_dir / (stem + ".json");
    write_text_file(meta_path, meta.dump(2) + "\n");
    return meta_path;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    ds.validate();
    for (const auto& inst : ds.instances) write_instance(inst, dir);

    json manifest = json::array();
    for (const auto& [key, count] : ds.manifest) {
        json row;
        row["subject"] = key.subject;
        row["task"] = to_string(key.task);
        row["label"] = key.label ? json(std::string(to_string(*key.label))) : json(nullptr);
        row["count"] = count;
        manifest.push_back(row);
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoFailure("cannot create " + dir.string() + ": " + ec.message());
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec) || ec)
        throw IoFailure("not a directory: " + dir.string());

    std::vector<std::filesystem::path> meta_paths;
    for (auto it = std::filesystem::recursive_directory_iterator(dir, ec);
         it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) throw IoFailure("cannot scan " + dir.string() + ": " + ec.message());
        if (!it->is_regular_file()) continue;
        const auto& p = it->path();
        if (p.extension() == ".json" && p.filename() != "manifest.json") meta_paths.push_back(p);
    }
    std::sort(meta_paths.begin(), meta_paths.end(),
              [](const auto& a, const auto& b) { return a.generic_string() < b.generic_string(); });

    std::vector<TaskInstance> instances;
    instances.reserve(meta_paths.size());
    for (const auto& meta_path : meta_paths) {
        try {
            json meta = json::parse(read_text_file(meta_path));
            TaskInstance inst;
            inst.subject_id = meta.at("subject").get<std::string>();
            auto kind = task_from_string(meta.at("task").get<std::string>() + "_" +
                                         meta.at("category").get<std::string>());
            if (!kind) throw SchemaViolation("unknown task/category pair");
            inst.task = *kind;
            if (!meta.at("label").is_null()) {
                auto label = emotion_from_string(meta.at("label").get<std::string>());
                if (!label) throw SchemaViolation("unknown label '" + meta.at("label").get<std::string>() + "'");
                inst.label = *label;
            }
            inst.repetition = meta.at("repetition").get<int>();
            auto base = meta_path.parent_path();
            inst.ee = parse_ee_stream(read_text_file(base / meta.at("ee_file").get<std::string>()));
            inst.joints = parse_joint_stream(read_text_file(base / meta.at("joints_file").get<std::string>()));
            inst.validate();
            instances.push_back(std::move(inst));
        } catch (const IoFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw SchemaViolation(meta_path.string() + ": " + e.what());
        }
    }
    return Dataset::from_instances(std::move(instances));
}

}  // namespace emokin
