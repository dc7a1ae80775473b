#include "pcnn/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "pcnn/errors.hpp"

namespace pcnn {

std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

const std::string* Checkpoint::find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return &v;
    return nullptr;
}

const TensorData* Checkpoint::find_tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

namespace {

std::string meta_or_throw(const Checkpoint& ck, const std::string& key) {
    const std::string* v = ck.find_meta(key);
    if (!v) throw DataError("checkpoint: missing metadata key " + key);
    return *v;
}

void write_le_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_le_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_le_doubles(std::ostream& os, const std::vector<double>& v) {
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        write_le_u64(os, bits);
    }
}

std::vector<double> read_le_doubles(std::istream& is, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = read_le_u64(is);
        std::memcpy(&v[i], &bits, 8);
    }
    return v;
}

std::string iso_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open " + path + " for writing");
    os << "pcnn-checkpoint v1\n";
    os << "kind " << ck.kind << "\n";
    os << "created " << iso_now() << "\n";
    for (const auto& [k, v] : ck.meta) os << "meta " << k << "\t" << v << "\n";
    for (const auto& [name, t] : ck.tensors)
        os << "tensor " << name << " " << t.rows << " " << t.cols << "\n";
    os << "end-header\n";
    for (const auto& [name, t] : ck.tensors) {
        write_le_u64(os, t.v.size());
        write_le_doubles(os, t.v);
    }
    if (!os) throw DataError("checkpoint: write failure on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open " + path);
    Checkpoint ck;
    std::string line;
    if (!std::getline(is, line) || line != "pcnn-checkpoint v1")
        throw DataError("checkpoint: bad magic in " + path);
    while (std::getline(is, line)) {
        if (line == "end-header") break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "kind") {
            ls >> ck.kind;
        } else if (tag == "created") {
            // timestamp line, intentionally ignored
        } else if (tag == "meta") {
            std::string rest;
            std::getline(ls, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
            auto tab = rest.find('\t');
            if (tab == std::string::npos) throw DataError("checkpoint: malformed meta line");
            ck.meta.emplace_back(rest.substr(0, tab), rest.substr(tab + 1));
        } else if (tag == "tensor") {
            std::string name;
            std::size_t r, c;
            if (!(ls >> name >> r >> c)) throw DataError("checkpoint: malformed tensor line");
            TensorData t;
            t.rows = r;
            t.cols = c;
            ck.tensors.emplace_back(name, std::move(t));
        } else {
            throw DataError("checkpoint: unknown header line: " + line);
        }
    }
    for (auto& [name, t] : ck.tensors) {
        std::uint64_t n = read_le_u64(is);
        if (n != t.rows * t.cols)
            throw DataError("checkpoint: payload length mismatch for tensor " + name);
        t.v = read_le_doubles(is, n);
    }
    if (!is) throw DataError("checkpoint: truncated payload in " + path);
    return ck;
}

// ------------------------------------------------------- model serialization

namespace {

void put_topology(Checkpoint& ck, const BuildingTopology& topo) {
    ck.meta.emplace_back("zones", std::to_string(topo.zone_count()));
    std::string edges;
    for (auto [a, b] : topo.edges()) {
        if (!edges.empty()) edges += ";";
        edges += std::to_string(a + 1) + "-" + std::to_string(b + 1);  // 1-indexed in files
    }
    ck.meta.emplace_back("edges", edges);
    std::string ext;
    for (std::size_t z = 0; z < topo.zone_count(); ++z)
        if (topo.has_external_wall(z)) {
            if (!ext.empty()) ext += ";";
            ext += std::to_string(z + 1);
        }
    ck.meta.emplace_back("external", ext);
}

BuildingTopology get_topology(const Checkpoint& ck) {
    std::size_t m = std::stoul(meta_or_throw(ck, "zones"));
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::istringstream es(meta_or_throw(ck, "edges"));
    std::string item;
    while (std::getline(es, item, ';')) {
        if (item.empty()) continue;
        auto dash = item.find('-');
        if (dash == std::string::npos) throw DataError("checkpoint: malformed edge " + item);
        edges.emplace_back(std::stoul(item.substr(0, dash)) - 1,
                           std::stoul(item.substr(dash + 1)) - 1);
    }
    std::vector<bool> ext(m, false);
    std::istringstream xs(meta_or_throw(ck, "external"));
    while (std::getline(xs, item, ';'))
        if (!item.empty()) ext[std::stoul(item) - 1] = true;
    return BuildingTopology(m, std::move(edges), std::move(ext));
}

void put_net_config(Checkpoint& ck, const BlackBoxConfig& cfg) {
    ck.meta.emplace_back("net.input", std::to_string(cfg.input_dim));
    ck.meta.emplace_back("net.encoder", std::to_string(cfg.encoder_width));
    ck.meta.emplace_back("net.recurrent", std::to_string(cfg.recurrent_width));
    ck.meta.emplace_back("net.layers", std::to_string(cfg.recurrent_layers));
    ck.meta.emplace_back("net.decoder", std::to_string(cfg.decoder_width));
    ck.meta.emplace_back("net.output", std::to_string(cfg.output_dim));
    ck.meta.emplace_back("net.cell", cfg.cell == CellKind::Gru ? "gru" : "lstm");
}

BlackBoxConfig get_net_config(const Checkpoint& ck) {
    BlackBoxConfig cfg;
    cfg.input_dim = std::stoul(meta_or_throw(ck, "net.input"));
    cfg.encoder_width = std::stoul(meta_or_throw(ck, "net.encoder"));
    cfg.recurrent_width = std::stoul(meta_or_throw(ck, "net.recurrent"));
    cfg.recurrent_layers = std::stoul(meta_or_throw(ck, "net.layers"));
    cfg.decoder_width = std::stoul(meta_or_throw(ck, "net.decoder"));
    cfg.output_dim = std::stoul(meta_or_throw(ck, "net.output"));
    cfg.cell = meta_or_throw(ck, "net.cell") == "gru" ? CellKind::Gru : CellKind::Lstm;
    return cfg;
}

void put_params(Checkpoint& ck, DynamicsModel& model) {
    model.for_each_param([&](const std::string& name, std::size_t r, std::size_t c,
                             std::vector<double>& v) {
        TensorData t;
        t.rows = r;
        t.cols = c;
        t.v = v;
        ck.tensors.emplace_back(name, std::move(t));
    });
}

void load_params(DynamicsModel& model, const Checkpoint& ck) {
    model.for_each_param([&](const std::string& name, std::size_t r, std::size_t c,
                             std::vector<double>& v) {
        const TensorData* t = ck.find_tensor(name);
        if (!t) throw DataError("checkpoint: missing tensor " + name);
        if (t->rows != r || t->cols != c || t->v.size() != v.size())
            throw DataError("checkpoint: shape mismatch for tensor " + name);
        v = t->v;
    });
}

void put_norm_stats(Checkpoint& ck, const std::string& prefix, const BlackBoxNet& net) {
    TensorData mean, var;
    mean.rows = var.rows = net.norm_mean().size();
    mean.cols = var.cols = 1;
    mean.v = net.norm_mean();
    var.v = net.norm_var();
    ck.tensors.emplace_back(prefix + "norm_mean", std::move(mean));
    ck.tensors.emplace_back(prefix + "norm_var", std::move(var));
}

void load_norm_stats(BlackBoxNet& net, const std::string& prefix, const Checkpoint& ck) {
    const TensorData* mean = ck.find_tensor(prefix + "norm_mean");
    const TensorData* var = ck.find_tensor(prefix + "norm_var");
    if (!mean || !var) throw DataError("checkpoint: missing normalization stats " + prefix);
    net.set_norm_stats(mean->v, var->v);
}

std::string net_prefix(const PcnnModel& model, std::size_t i) {
    return model.variant() == PcnnVariant::S ? std::string("net.")
                                             : "zone" + std::to_string(i) + ".net.";
}

}  // namespace

Checkpoint to_checkpoint(const DynamicsModel& model) {
    Checkpoint ck;
    DynamicsModel& m = const_cast<DynamicsModel&>(model);  // for_each_param is non-const
    ck.kind = model.kind();

    if (auto* p = dynamic_cast<const PcnnModel*>(&model)) {
        put_topology(ck, p->topology());
        const auto& s0 = p->shared_physics().s0;
        ck.meta.emplace_back("s0", format_double(s0.a_h0) + ";" + format_double(s0.a_c0) + ";" +
                                       format_double(s0.b0) + ";" + format_double(s0.c0));
        ck.meta.emplace_back("x_merged", p->x_merged() ? "1" : "0");
        put_net_config(ck, p->nets().front().config());
        put_params(ck, m);
        for (std::size_t i = 0; i < p->nets().size(); ++i)
            put_norm_stats(ck, net_prefix(*p, i), p->nets()[i]);
    } else if (auto* lin = dynamic_cast<const LinearModel*>(&model)) {
        put_topology(ck, lin->topology());
        ck.meta.emplace_back("degenerate", lin->degenerate_fit() ? "1" : "0");
        put_params(ck, m);
    } else if (auto* res = dynamic_cast<const ResidualModel*>(&model)) {
        put_topology(ck, res->base().topology());
        ck.meta.emplace_back("consistent", res->consistent() ? "1" : "0");
        ck.meta.emplace_back(
            "hidden", std::to_string(const_cast<ResidualModel*>(res)->net().config().hidden));
        put_params(ck, const_cast<LinearModel&>(res->base()));
        put_params(ck, m);
    } else if (auto* arx = dynamic_cast<const ArxModel*>(&model)) {
        ck.meta.emplace_back("zones", std::to_string(arx->zone_count()));
        ck.meta.emplace_back("delta", std::to_string(arx->delta()));
        ck.meta.emplace_back("condition", format_double(arx->fit_condition_number()));
        put_params(ck, m);
    } else if (auto* bb = dynamic_cast<const BlackboxModel*>(&model)) {
        put_topology(ck, bb->topology());
        put_net_config(ck, const_cast<BlackboxModel*>(bb)->net().config());
        put_params(ck, m);
        put_norm_stats(ck, "net.", const_cast<BlackboxModel*>(bb)->net());
    } else if (auto* pp = dynamic_cast<const PurePhysicsModel*>(&model)) {
        put_topology(ck, pp->topology());
        const EffectivePhysics& eff = pp->physics();
        auto put = [&](const char* name, const std::vector<double>& v) {
            TensorData t;
            t.rows = v.size();
            t.cols = 1;
            t.v = v;
            ck.tensors.emplace_back(name, std::move(t));
        };
        put("phys.a_h", eff.a_h);
        put("phys.a_c", eff.a_c);
        put("phys.b", eff.b);
        put("phys.c", eff.c);
    } else {
        throw ConfigError("checkpoint: unknown model type " + model.kind());
    }
    return ck;
}

std::unique_ptr<DynamicsModel> from_checkpoint(const Checkpoint& ck) {
    if (ck.kind == "x-pcnn" || ck.kind == "m-pcnn" || ck.kind == "s-pcnn") {
        PcnnVariant variant = pcnn_variant_from_string(ck.kind.substr(0, 1));
        BuildingTopology topo = get_topology(ck);
        PhysicsScales s0;
        std::istringstream ss(meta_or_throw(ck, "s0"));
        std::string item;
        double* dst[] = {&s0.a_h0, &s0.a_c0, &s0.b0, &s0.c0};
        for (double* d : dst) {
            if (!std::getline(ss, item, ';')) throw DataError("checkpoint: malformed s0");
            *d = std::strtod(item.c_str(), nullptr);
        }
        auto model = std::make_unique<PcnnModel>(variant, topo, get_net_config(ck), s0, 0);
        if (meta_or_throw(ck, "x_merged") == "1") model->mark_x_merged();
        load_params(*model, ck);
        for (std::size_t i = 0; i < model->nets().size(); ++i)
            load_norm_stats(model->nets()[i], net_prefix(*model, i), ck);
        return model;
    }
    if (ck.kind == "linear" || ck.kind == "res" || ck.kind == "res-cons") {
        BuildingTopology topo = get_topology(ck);
        auto tensor = [&](const char* name) {
            const TensorData* t = ck.find_tensor(name);
            if (!t) throw DataError(std::string("checkpoint: missing tensor ") + name);
            return t->v;
        };
        EffectivePhysics eff;
        eff.a_h = tensor("lin.a_h");
        eff.a_c = tensor("lin.a_c");
        eff.b = tensor("lin.b");
        eff.c = topo.edges().empty() ? std::vector<double>{} : tensor("lin.c");
        LinearModel base(topo, std::move(eff), tensor("lin.e"));
        if (const std::string* d = ck.find_meta("degenerate"); d && *d == "1")
            base.mark_degenerate();
        if (ck.kind == "linear") return std::make_unique<LinearModel>(std::move(base));
        bool consistent = meta_or_throw(ck, "consistent") == "1";
        std::size_t hidden = std::stoul(meta_or_throw(ck, "hidden"));
        auto model = std::make_unique<ResidualModel>(std::move(base), consistent, hidden, 0);
        load_params(*model, ck);
        return model;
    }
    if (ck.kind == "arx") {
        auto model = std::make_unique<ArxModel>(std::stoul(meta_or_throw(ck, "zones")),
                                                std::stoul(meta_or_throw(ck, "delta")));
        load_params(*model, ck);
        return model;
    }
    if (ck.kind == "blackbox") {
        BuildingTopology topo = get_topology(ck);
        BlackBoxConfig cfg = get_net_config(ck);
        auto model = std::make_unique<BlackboxModel>(topo, cfg, 0);
        load_params(*model, ck);
        load_norm_stats(model->net(), "net.", ck);
        return model;
    }
    if (ck.kind == "pure-physics") {
        BuildingTopology topo = get_topology(ck);
        auto tensor = [&](const char* name) {
            const TensorData* t = ck.find_tensor(name);
            if (!t) throw DataError(std::string("checkpoint: missing tensor ") + name);
            return t->v;
        };
        EffectivePhysics eff;
        eff.a_h = tensor("phys.a_h");
        eff.a_c = tensor("phys.a_c");
        eff.b = tensor("phys.b");
        eff.c = tensor("phys.c");
        return std::make_unique<PurePhysicsModel>(topo, std::move(eff));
    }
    throw DataError("checkpoint: unknown model kind " + ck.kind);
}

// ------------------------------------------------------------------- dataset

namespace {

std::string iso_from_unix(std::int64_t t) {
    std::time_t tt = static_cast<std::time_t>(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::int64_t unix_from_iso(const std::string& s) {
    std::tm tm{};
    int y, mo, d, h, mi, sec;
    if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%dZ", &y, &mo, &d, &h, &mi, &sec) != 6)
        throw DataError("dataset: malformed timestamp " + s);
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = sec;
    return static_cast<std::int64_t>(timegm(&tm));
}

}  // namespace

void save_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("dataset: cannot open " + path + " for writing");
    const std::size_t m = data.zone_count;
    os << "timestamp";
    for (std::size_t z = 1; z <= m; ++z) os << ",T_" << z;
    for (std::size_t z = 1; z <= m; ++z) os << ",u_" << z;
    os << ",T_out,Q_sun";
    if (data.has_q_win())
        for (std::size_t z = 1; z <= m; ++z) os << ",Q_win_" << z;
    os << "\n";
    for (std::size_t k = 0; k < data.size(); ++k) {
        os << iso_from_unix(data.timestamps[k]);
        bool miss = data.missing[k];
        auto cell = [&](double v) {
            os << ",";
            if (!miss) os << format_double(v);
        };
        for (std::size_t z = 0; z < m; ++z) cell(data.T[k][z]);
        for (std::size_t z = 0; z < m; ++z) cell(data.u[k][z]);
        cell(data.T_out[k]);
        cell(data.Q_sun[k]);
        if (data.has_q_win())
            for (std::size_t z = 0; z < m; ++z) cell(data.Q_win[k][z]);
        os << "\n";
    }
    if (!os) throw DataError("dataset: write failure on " + path);
}

Dataset load_dataset_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("dataset: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw DataError("dataset: empty file " + path);
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) header.push_back(col);
    }
    if (header.empty() || header[0] != "timestamp")
        throw DataError("dataset: first column must be timestamp");
    std::size_t m = 0;
    while (1 + m < header.size() && header[1 + m] == "T_" + std::to_string(m + 1)) ++m;
    if (m == 0) throw DataError("dataset: no zone temperature columns");
    bool q_win = header.size() == 1 + 2 * m + 2 + m;
    std::size_t expected = 1 + 2 * m + 2 + (q_win ? m : 0);
    if (header.size() != expected)
        throw DataError("dataset: unexpected column count in " + path);

    Dataset d;
    d.zone_count = m;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        while (cells.size() < expected) cells.push_back("");  // trailing blanks
        if (cells.size() != expected)
            throw DataError("dataset: wrong cell count in row " +
                            std::to_string(d.timestamps.size() + 1));
        d.timestamps.push_back(unix_from_iso(cells[0]));
        bool miss = false;
        for (std::size_t i = 1; i < cells.size(); ++i)
            if (cells[i].empty()) miss = true;
        auto num = [&](const std::string& s) {
            if (s.empty()) return 0.0;
            char* end = nullptr;
            double v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0')
                throw DataError("dataset: non-numeric cell '" + s + "'");
            return v;
        };
        std::size_t i = 1;
        std::vector<double> T(m), u(m), qw(m);
        for (std::size_t z = 0; z < m; ++z) T[z] = num(cells[i++]);
        for (std::size_t z = 0; z < m; ++z) u[z] = num(cells[i++]);
        double tout = num(cells[i++]);
        double qsun = num(cells[i++]);
        if (q_win)
            for (std::size_t z = 0; z < m; ++z) qw[z] = num(cells[i++]);
        d.T.push_back(std::move(T));
        d.u.push_back(std::move(u));
        d.T_out.push_back(tout);
        d.Q_sun.push_back(qsun);
        if (q_win) d.Q_win.push_back(std::move(qw));
        d.missing.push_back(miss);
    }
    d.validate();
    return d;
}

// --------------------------------------------------------------- truth files

void save_truth(const PlantTruth& truth, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("truth: cannot open " + path + " for writing");
    os << "pcnn-truth v1\n";
    os << "zones " << truth.zone_count << "\n";
    os << "edges";
    for (auto [a, b] : truth.edges) os << " " << (a + 1) << "-" << (b + 1);
    os << "\n";
    auto row = [&](const char* name, const std::vector<double>& v) {
        os << name;
        for (double x : v) os << " " << format_double(x);
        os << "\n";
    };
    row("a_h", truth.a_h);
    row("a_c", truth.a_c);
    row("b", truth.b);
    row("c", truth.c);
    row("e", truth.e);
    os << "nonlinearity " << to_string(truth.nonlinearity) << "\n";
    os << "noise_std " << format_double(truth.noise_std) << "\n";
}

PlantTruth load_truth(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("truth: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != "pcnn-truth v1")
        throw DataError("truth: bad magic in " + path);
    PlantTruth t;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        auto vec = [&] {
            std::vector<double> v;
            double x;
            while (ls >> x) v.push_back(x);
            return v;
        };
        if (tag == "zones") ls >> t.zone_count;
        else if (tag == "edges") {
            std::string e;
            while (ls >> e) {
                auto dash = e.find('-');
                t.edges.emplace_back(std::stoul(e.substr(0, dash)) - 1,
                                     std::stoul(e.substr(dash + 1)) - 1);
            }
        } else if (tag == "a_h") t.a_h = vec();
        else if (tag == "a_c") t.a_c = vec();
        else if (tag == "b") t.b = vec();
        else if (tag == "c") t.c = vec();
        else if (tag == "e") t.e = vec();
        else if (tag == "nonlinearity") {
            std::string s;
            ls >> s;
            t.nonlinearity = nonlinearity_from_string(s);
        } else if (tag == "noise_std") ls >> t.noise_std;
    }
    return t;
}

}  // namespace pcnn
