package org.owasp.benchmark.testcode;

import java.io.IOException;
import javax.servlet.ServletException;
import javax.servlet.annotation.WebServlet;
import javax.servlet.http.HttpServlet;
import javax.servlet.http.HttpServletRequest;
import javax.servlet.http.HttpServletResponse;

@WebServlet(value = "/pathtraver-00/BenchmarkTest00038")
public class BenchmarkTest00038 extends HttpServlet {

    private static final long serialVersionUID = 1L;

    @Override
    public void doPost(HttpServletRequest request, HttpServletResponse response)
            throws ServletException, IOException {
        response.setContentType("text/html;charset=UTF-8");

        String param = request.getParameter("BenchmarkTest00038");
        if (param == null) param = "";

        String bar = "safe3";
        java.util.List<String> valuesList = new java.util.ArrayList<String>();
        valuesList.add("safe2");
        valuesList.add(param);
        valuesList.add("safe3");
        valuesList.remove(0);
        bar = valuesList.get(1);

        try {
            String fileName = org.owasp.benchmark.helpers.Utils.TESTFILES_DIR + bar;
            java.io.FileInputStream fis = new java.io.FileInputStream(new java.io.File(fileName));
        } catch (Exception e) {
            throw new ServletException(e);
        }
    }
}
