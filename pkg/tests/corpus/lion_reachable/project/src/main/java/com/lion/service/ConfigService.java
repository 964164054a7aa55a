package com.lion.service;

import com.lion.util.XmlUtil;

public class ConfigService {
    public Object loadConfig(String payload) {
        return XmlUtil.xml2Obj(payload, Object.class);
    }
}
