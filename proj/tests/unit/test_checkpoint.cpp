#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "lgnn/checkpoint.hpp"
#include "lgnn/error.hpp"

using namespace lgnn;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "lgnn_unit";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("checkpoint round trip for every layer kind") {
    for (LayerKind kind : {LayerKind::gcn, LayerKind::sage, LayerKind::edge, LayerKind::gat}) {
        ModelConfig cfg;
        cfg.layer_kind = kind;
        cfg.r = 0.7;
        cfg.hidden_dims = hidden_dims_for_depth(3);
        Rng rng(3);
        const ModelParams params = init_params(cfg, rng);
        const auto path = temp_file("model.ckpt");
        save_checkpoint(path, cfg, params);
        const Checkpoint back = load_checkpoint(path);
        CHECK(back.config == cfg);
        const auto a = params.parameters();
        const auto b = back.params.parameters();
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i]->name == b[i]->name);
            CHECK(a[i]->value == b[i]->value);
        }
    }
}

TEST_CASE("checkpoint header and corruption") {
    const auto path = temp_file("hdr.ckpt");
    Rng rng(4);
    save_checkpoint(path, ModelConfig{}, init_params(ModelConfig{}, rng));
    {
        std::ifstream is(path, std::ios::binary);
        char magic[8];
        is.read(magic, 8);
        CHECK(std::string(magic, 8) == "LGNNCKPT");
    }
    const auto bad = temp_file("bad.ckpt");
    {
        std::ofstream os(bad, std::ios::binary);
        os << "NOTACKPT";
    }
    CHECK_THROWS_AS(load_checkpoint(bad), ParseError);
    const auto trunc = temp_file("trunc.ckpt");
    std::filesystem::copy_file(path, trunc, std::filesystem::copy_options::overwrite_existing);
    std::filesystem::resize_file(trunc, std::filesystem::file_size(path) - 12);
    CHECK_THROWS(load_checkpoint(trunc));
    CHECK_THROWS_AS(load_checkpoint(temp_file("missing.ckpt")), IoError);
}
