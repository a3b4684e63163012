//! CSV datasets, schema files, trajectory tables and model files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndiff::Matrix;

use crate::model::{FrengressionModel, TrainingLog};
use crate::nets::{GeneratorNet, Margin};
use crate::schema::ColumnSchema;
use crate::seq::{SeqKind, SeqSchema, TrajectoryBatch};
use crate::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Writes a header row and one record per matrix row.
pub fn write_csv(w: impl Write, header: &[String], data: &Matrix) -> Result<()> {
    if header.len() != data.cols() {
        return Err(Error::Dimension(format!("{} names for {} columns", header.len(), data.cols())));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for row in data.iter_rows() {
        out.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a numeric table with a header row.
pub fn read_csv(r: impl Read) -> Result<(Vec<String>, Matrix)> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        for field in rec.iter() {
            let v: f64 =
                field.trim().parse().map_err(|_| Error::Format(format!("row {}: {field:?} is not a number", i + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    let m = Matrix::new(rows, header.len(), data)?;
    Ok((header, m))
}

/// Reads the schema's columns (by name, in schema order) from a CSV file.
pub fn read_dataset(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Matrix> {
    let (header, table) = read_csv(BufReader::new(File::open(path)?))?;
    let idx = schema
        .columns()
        .map(|c| {
            header
                .iter()
                .position(|h| h == &c.name)
                .ok_or_else(|| Error::Format(format!("column {} missing from dataset", c.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(table.select_cols(&idx)?)
}

pub fn write_dataset(path: impl AsRef<Path>, schema: &ColumnSchema, data: &Matrix) -> Result<()> {
    let header: Vec<String> = schema.columns().map(|c| c.name.clone()).collect();
    write_csv(BufWriter::new(File::create(path)?), &header, data)
}

pub fn read_schema(path: impl AsRef<Path>) -> Result<ColumnSchema> {
    ColumnSchema::parse(&std::fs::read_to_string(path)?)
}

pub fn write_schema(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<()> {
    std::fs::write(path, schema.to_text())?;
    Ok(())
}

/// Column names `C_*`, then `Z{t}_*`, `X{t}_*`, `Y{t}` for each step.
pub fn trajectory_header(schema: &SeqSchema, horizon: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=schema.d_c()).map(|k| format!("C_{k}")).collect();
    for t in 0..horizon {
        h.extend((1..=schema.d_z()).map(|k| format!("Z{t}_{k}")));
        h.extend((1..=schema.d_x()).map(|k| format!("X{t}_{k}")));
        if schema.d_y() == 1 {
            h.push(format!("Y{t}"));
        } else {
            h.extend((1..=schema.d_y()).map(|k| format!("Y{t}_{k}")));
        }
    }
    h
}

pub fn trajectory_table(batch: &TrajectoryBatch) -> Result<Matrix> {
    let mut blocks: Vec<&Matrix> = vec![&batch.c];
    for t in 0..batch.horizon() {
        blocks.extend([&batch.z[t], &batch.x[t], &batch.y[t]]);
    }
    Ok(Matrix::hcat(&blocks)?)
}

pub fn write_trajectories(w: impl Write, schema: &SeqSchema, batch: &TrajectoryBatch) -> Result<()> {
    write_csv(w, &trajectory_header(schema, batch.horizon()), &trajectory_table(batch)?)
}

/// Reads the trajectory layout back; survival risk sets are rebuilt from `Y`.
pub fn read_trajectories(r: impl Read, schema: &SeqSchema, kind: SeqKind) -> Result<TrajectoryBatch> {
    let (header, table) = read_csv(r)?;
    let (dc, dz, dx, dy) = (schema.d_c(), schema.d_z(), schema.d_x(), schema.d_y());
    let per = dz + dx + dy;
    if header.len() < dc || (header.len() - dc) % per != 0 {
        return Err(Error::Format("column count does not match the trajectory layout".into()));
    }
    let horizon = (header.len() - dc) / per;
    if header != trajectory_header(schema, horizon) {
        return Err(Error::Format("unexpected trajectory column names".into()));
    }
    let c = table.slice_cols(0, dc)?;
    let (mut z, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for t in 0..horizon {
        let off = dc + t * per;
        z.push(table.slice_cols(off, dz)?);
        x.push(table.slice_cols(off + dz, dx)?);
        y.push(table.slice_cols(off + dz + dx, dy)?);
    }
    TrajectoryBatch::new(c, z, x, y, kind)
}

const MODEL_MAGIC: &[u8; 4] = b"FRM1";

fn write_opt(w: &mut impl Write, net: Option<&GeneratorNet>) -> Result<()> {
    match net {
        Some(n) => {
            w.write_all(&[1])?;
            n.write_to(w)
        }
        None => Ok(w.write_all(&[0])?),
    }
}

fn read_opt(r: &mut impl Read) -> Result<Option<GeneratorNet>> {
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    match flag[0] {
        0 => Ok(None),
        1 => Ok(Some(GeneratorNet::read_from(r)?)),
        f => Err(Error::Format(format!("bad presence flag {f}"))),
    }
}

/// Schema text followed by the nets in their binary format.
pub fn write_model(w: &mut impl Write, model: &FrengressionModel) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    let text = model.schema().to_text();
    w.write_all(&(text.len() as u64).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    write_opt(w, model.g())?;
    model.f().write_to(w)?;
    model.h().write_to(w)?;
    write_opt(w, model.e())
}

pub fn read_model(r: &mut impl Read) -> Result<FrengressionModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut text = vec![0u8; len];
    r.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|e| Error::Format(e.to_string()))?;
    let schema = ColumnSchema::parse(&text)?;
    let g = read_opt(r)?;
    let f = Margin::read_from(r)?;
    let h = GeneratorNet::read_from(r)?;
    let e = read_opt(r)?;
    let mut m = FrengressionModel::from_parts(schema, g, f, h, e)?;
    m.log = TrainingLog::default();
    Ok(m)
}

pub fn save_model(path: impl AsRef<Path>, model: &FrengressionModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FrengressionModel> {
    read_model(&mut BufReader::new(File::open(path)?))
}
