#include "subgroupte/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace subgroupte {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open '" + tmp + "' for writing");
        os << content;
        os.flush();
        if (!os) throw std::runtime_error("write to '" + tmp + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw std::runtime_error("rename '" + tmp + "' -> '" + path + "': " + ec.message());
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_double(const std::string& tok, std::size_t row, const std::string& col) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw std::invalid_argument("row " + std::to_string(row) + ": cannot parse '" + tok +
                                    "' in column " + col);
    return v;
}

std::int64_t parse_id(const std::string& tok, std::size_t row) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(begin, &end, 10);
    if (end == begin || *end != '\0' || errno == ERANGE)
        throw std::invalid_argument("row " + std::to_string(row) + ": cannot parse id '" + tok +
                                    "'");
    return v;
}

}  // namespace

Dataset load_csv(const std::string& path, bool require_oracle) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::invalid_argument("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("'" + path + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = split_line(line);
    if (header.empty() || header[0] != "id")
        throw std::invalid_argument("'" + path + "': header must start with 'id'");
    std::size_t p = 0;
    while (1 + p < header.size() && header[1 + p] == "x" + std::to_string(p)) ++p;
    if (p == 0) throw std::invalid_argument("'" + path + "': no covariate columns x0..");
    const std::size_t ti = 1 + p;
    if (ti + 1 >= header.size() || header[ti] != "t" || header[ti + 1] != "y")
        throw std::invalid_argument("'" + path + "': expected columns t,y after covariates");
    bool oracle = false;
    if (header.size() == ti + 2) {
        oracle = false;
    } else if (header.size() == ti + 5 && header[ti + 2] == "y0" && header[ti + 3] == "y1" &&
               header[ti + 4] == "te") {
        oracle = true;
    } else {
        throw std::invalid_argument("'" + path +
                                    "': trailing columns must be exactly y0,y1,te or absent");
    }
    if (require_oracle && !oracle)
        throw std::invalid_argument("'" + path + "': oracle columns y0,y1,te required but absent");

    Dataset d;
    d.p = p;
    d.has_oracle = oracle;
    std::size_t row = 0;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        const std::vector<std::string> tok = split_line(line);
        if (tok.size() != header.size())
            throw std::invalid_argument("row " + std::to_string(row) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " +
                                        std::to_string(tok.size()));
        d.id.push_back(parse_id(tok[0], row));
        for (std::size_t j = 0; j < p; ++j)
            d.x.push_back(parse_double(tok[1 + j], row, header[1 + j]));
        const double tv = parse_double(tok[ti], row, "t");
        if (tv != 0.0 && tv != 1.0)
            throw std::invalid_argument("row " + std::to_string(row) +
                                        ": treatment must be 0 or 1, got '" + tok[ti] + "'");
        d.t.push_back(static_cast<int>(tv));
        d.y.push_back(parse_double(tok[ti + 1], row, "y"));
        if (oracle) {
            d.y0.push_back(parse_double(tok[ti + 2], row, "y0"));
            d.y1.push_back(parse_double(tok[ti + 3], row, "y1"));
            d.te.push_back(parse_double(tok[ti + 4], row, "te"));
        }
    }
    d.n = row;
    if (d.n == 0) throw std::invalid_argument("'" + path + "': no data rows");
    d.validate();
    return d;
}

void save_csv(const Dataset& data, const std::string& path) {
    data.validate();
    std::ostringstream os;
    os << "id";
    for (std::size_t j = 0; j < data.p; ++j) os << ",x" << j;
    os << ",t,y";
    if (data.has_oracle) os << ",y0,y1,te";
    os << '\n';
    for (std::size_t i = 0; i < data.n; ++i) {
        os << data.id[i];
        for (std::size_t j = 0; j < data.p; ++j) os << ',' << format_double(data.covariate(i, j));
        os << ',' << data.t[i] << ',' << format_double(data.y[i]);
        if (data.has_oracle)
            os << ',' << format_double(data.y0[i]) << ',' << format_double(data.y1[i]) << ','
               << format_double(data.te[i]);
        os << '\n';
    }
    write_text_atomic(path, os.str());
}

namespace {

constexpr int kCheckpointVersion = 1;

json config_to_json(const TrainConfig& cfg) {
    json j;
    j["alpha"] = cfg.alpha;
    j["beta"] = cfg.beta;
    j["gamma"] = cfg.gamma;
    j["k"] = cfg.k;
    j["lr"] = cfg.lr;
    j["batch_size"] = cfg.batch_size;
    j["max_epochs"] = cfg.max_epochs;
    j["patience"] = cfg.patience;
    j["hidden_dim"] = cfg.hidden_dim;
    j["bandwidth"] = cfg.bandwidth ? json(*cfg.bandwidth) : json(nullptr);
    j["seed"] = cfg.seed;
    j["split"] = cfg.split;
    j["per_batch_estep"] = cfg.per_batch_estep;
    j["encoder"] = {{"token_dim", cfg.encoder.token_dim},
                    {"n_heads", cfg.encoder.n_heads},
                    {"use_encoder", cfg.encoder.use_encoder}};
    return j;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.alpha = j.at("alpha").get<double>();
    cfg.beta = j.at("beta").get<double>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.k = j.at("k").get<std::size_t>();
    cfg.lr = j.at("lr").get<double>();
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.max_epochs = j.at("max_epochs").get<std::size_t>();
    cfg.patience = j.at("patience").get<std::size_t>();
    cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    if (!j.at("bandwidth").is_null()) cfg.bandwidth = j.at("bandwidth").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.split = j.at("split").get<std::array<double, 3>>();
    cfg.per_batch_estep = j.at("per_batch_estep").get<bool>();
    const json& e = j.at("encoder");
    cfg.encoder.token_dim = e.at("token_dim").get<std::size_t>();
    cfg.encoder.n_heads = e.at("n_heads").get<std::size_t>();
    cfg.encoder.use_encoder = e.at("use_encoder").get<bool>();
    return cfg;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const SubgroupTEModel& m = ckpt.model;
    json j;
    j["format_version"] = kCheckpointVersion;
    j["spec"] = {{"input_dim", m.spec.input_dim},
                 {"hidden_dim", m.spec.hidden_dim},
                 {"activation", activation_name(m.spec.activation)},
                 {"encoder",
                  {{"token_dim", m.spec.encoder.token_dim},
                   {"n_heads", m.spec.encoder.n_heads},
                   {"use_encoder", m.spec.encoder.use_encoder}}}};
    j["k"] = m.K;
    j["centroids"] = {{"mu", m.centroids.mu}, {"h", m.centroids.h}};
    j["centroids_ready"] = m.centroids_ready;
    j["train_config"] = config_to_json(ckpt.config);
    j["best_val_mse"] = ckpt.best_val_mse;
    j["seed"] = ckpt.config.seed;

    json params = json::object();
    for (const auto& [name, entry] : m.params.entries()) {
        const Matrix& w = entry.value;
        std::vector<double> flat(w.rows() * w.cols());
        for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = w.at_flat(i);
        params[name] = {{"rows", w.rows()}, {"cols", w.cols()}, {"values", std::move(flat)}};
    }
    j["params"] = std::move(params);

    write_text_atomic(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::invalid_argument("cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw std::runtime_error("corrupt checkpoint '" + path + "': " + e.what());
    }

    try {
        if (!j.contains("format_version"))
            throw std::runtime_error("corrupt checkpoint '" + path + "': missing format_version");
        const int version = j.at("format_version").get<int>();
        if (version != kCheckpointVersion)
            throw std::runtime_error("checkpoint '" + path + "' has format_version " +
                                     std::to_string(version) + ", expected " +
                                     std::to_string(kCheckpointVersion));

        NetSpec spec;
        const json& js = j.at("spec");
        spec.input_dim = js.at("input_dim").get<std::size_t>();
        spec.hidden_dim = js.at("hidden_dim").get<std::size_t>();
        spec.activation = activation_from_name(js.at("activation").get<std::string>());
        const json& je = js.at("encoder");
        spec.encoder.token_dim = je.at("token_dim").get<std::size_t>();
        spec.encoder.n_heads = je.at("n_heads").get<std::size_t>();
        spec.encoder.use_encoder = je.at("use_encoder").get<bool>();

        Checkpoint out;
        out.config = config_from_json(j.at("train_config"));
        out.best_val_mse = j.at("best_val_mse").get<double>();
        out.model = SubgroupTEModel::create(spec, j.at("k").get<std::size_t>(), 0);

        const json& params = j.at("params");
        if (params.size() != out.model.params.entry_count())
            throw std::runtime_error("corrupt checkpoint '" + path + "': expected " +
                                     std::to_string(out.model.params.entry_count()) +
                                     " parameter tensors, found " + std::to_string(params.size()));
        for (const std::string& name : out.model.params.names()) {
            if (!params.contains(name))
                throw std::runtime_error("corrupt checkpoint '" + path +
                                         "': missing parameter '" + name + "'");
            const json& pj = params.at(name);
            Matrix& w = out.model.params.value(name);
            if (pj.at("rows").get<std::size_t>() != w.rows() ||
                pj.at("cols").get<std::size_t>() != w.cols())
                throw std::runtime_error("corrupt checkpoint '" + path + "': parameter '" + name +
                                         "' has wrong shape");
            const auto flat = pj.at("values").get<std::vector<double>>();
            if (flat.size() != w.rows() * w.cols())
                throw std::runtime_error("corrupt checkpoint '" + path + "': parameter '" + name +
                                         "' has wrong length");
            for (std::size_t i = 0; i < flat.size(); ++i) w.at_flat(i) = flat[i];
        }

        if (j.at("centroids_ready").get<bool>()) {
            Centroids c;
            c.mu = j.at("centroids").at("mu").get<std::vector<double>>();
            c.h = j.at("centroids").at("h").get<double>();
            out.model.set_centroids(std::move(c));
        }
        return out;
    } catch (const json::exception& e) {
        throw std::runtime_error("corrupt checkpoint '" + path + "': " + e.what());
    }
}

LogSink make_ndjson_sink(std::ostream& os) {
    return [&os](const TrainLogRecord& rec) {
        json j;
        j["epoch"] = rec.epoch;
        j["loss_total"] = rec.loss_total;
        j["loss_propensity"] = rec.loss_propensity;
        j["loss_pre"] = rec.loss_pre;
        j["loss_post"] = rec.loss_post;
        j["val_factual_mse"] = rec.val_factual_mse;
        j["centroids"] = rec.centroids;
        os << j.dump() << '\n';
        os.flush();
    };
}

}  // namespace subgroupte
