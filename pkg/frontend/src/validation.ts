/**
 * Client-side validation for the workspace start form.
 *
 * Mirrors the server's session-config rules exactly; the server re-checks
 * everything, so this only exists to catch mistakes before any API call.
 */

export interface WorkspaceFormFields {
  memoryLimitMib: number;
  cpuMillicores: number;
  driverMemory: string;
  driverCores: number;
  executorMemory: string;
  executorCores: number;
  numExecutors: number;
}

export interface FieldError {
  field: string;
  message: string;
}

const SIZE_RE = /^[0-9]+(m|g)$/;

function checkCount(errors: FieldError[], field: string, value: number): void {
  if (!Number.isInteger(value) || value < 1) {
    errors.push({ field, message: `${field} must be an integer >= 1` });
  }
}

function checkSize(errors: FieldError[], field: string, value: string): void {
  if (!SIZE_RE.test(value)) {
    errors.push({ field, message: `${field} must look like 2g or 512m` });
  }
}

export function validateWorkspaceForm(fields: WorkspaceFormFields): FieldError[] {
  const errors: FieldError[] = [];
  if (!Number.isInteger(fields.memoryLimitMib) || fields.memoryLimitMib < 1) {
    errors.push({ field: "memoryLimitMib", message: "memory limit must be a positive integer (MiB)" });
  }
  if (!Number.isInteger(fields.cpuMillicores) || fields.cpuMillicores < 1) {
    errors.push({ field: "cpuMillicores", message: "cpu limit must be a positive integer (millicores)" });
  }
  checkSize(errors, "driverMemory", fields.driverMemory);
  checkCount(errors, "driverCores", fields.driverCores);
  checkSize(errors, "executorMemory", fields.executorMemory);
  checkCount(errors, "executorCores", fields.executorCores);
  checkCount(errors, "numExecutors", fields.numExecutors);
  return errors;
}
